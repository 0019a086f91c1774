"""Experiment configuration, metrics and output-emission tests."""

import math

import numpy as np
import pytest

from foilfem.errors import ParseError
from foilfem.experiments import (
    ExperimentConfig,
    build_geometry,
    build_mesh,
    build_system,
    demo_inductor,
    emit_csv,
    emit_svg_plot,
    load_config,
    mesh_edge_length,
    noise_metric,
    read_csv_series,
    run_classify,
    run_transient,
)
from foilfem.timestepper import TimeSeries

DEFAULT_HASH = "81067f9045d76b5f009b2c14660b5f6d3b17db21cadbf4d73cbd78f8fd9c1070"


class TestConfig:
    def test_defaults_match_reference_table(self):
        cfg = ExperimentConfig()
        assert cfg.n_basis == 5
        assert cfg.n_turns == 50
        assert cfg.fill_factor == 0.8
        assert cfg.foil_pitch == 0.28e-3
        assert cfg.winding_height == 50e-3
        assert cfg.air_gap_length == 4.2e-3
        assert cfg.yoke_height == 76.2e-3
        assert cfg.yoke_outer_radius == 40e-3
        assert cfg.frequency == 50.0
        assert cfg.perturbation_frequency == pytest.approx(2 * math.pi * 1e10)
        assert cfg.perturbation_amplitude == 1e-3
        assert cfg.winding_conductivity == 6e7
        assert cfg.yoke_conductivity == 10.0
        assert cfg.yoke_permeability == 1000.0

    def test_default_hash_is_stable(self):
        assert ExperimentConfig().config_hash() == DEFAULT_HASH

    def test_load_config_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("dt = 1e-5\nmode = G\nmesh_level = 2  # fine\n")
        cfg = load_config(path)
        assert cfg.dt == 1e-5
        assert cfg.mode == "G"
        assert cfg.mesh_level == 2
        assert cfg.n_turns == 50  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bogus = 3\n")
        with pytest.raises(ParseError):
            load_config(path)

    def test_geometry_derives_winding_thickness(self):
        geom = build_geometry(ExperimentConfig())
        assert geom.winding_thickness == pytest.approx(50 * 0.28e-3)

    def test_mesh_levels(self):
        assert mesh_edge_length(0) == 8.0e-3
        assert mesh_edge_length(2) == 1.7e-3
        assert mesh_edge_length(4) == pytest.approx(0.425e-3)
        coarse = build_mesh(ExperimentConfig(), 0)
        assert 80 <= coarse.n_nodes <= 150


class TestNoiseMetric:
    def test_pure_sine_has_negligible_noise(self):
        t = np.arange(0.0, 0.04, 1e-5)
        y = 2.5 * np.sin(2 * np.pi * 50 * t)
        metric = noise_metric(t, y, 50.0)
        assert metric.fundamental_amplitude == pytest.approx(2.5, rel=1e-9)
        assert metric.noise_rms <= 1e-9 * metric.fundamental_amplitude

    def test_detects_high_frequency_tone(self):
        t = np.arange(0.0, 0.04, 1e-5)
        rng = np.random.default_rng(7)
        noise = 0.01 * rng.standard_normal(t.size)
        y = np.sin(2 * np.pi * 50 * t) + noise
        metric = noise_metric(t, y, 50.0)
        assert metric.noise_rms == pytest.approx(0.01, rel=0.15)

    def test_harmonics_are_removed(self):
        t = np.arange(0.0, 0.04, 1e-5)
        y = np.sin(2 * np.pi * 50 * t) + 0.3 * np.sin(2 * np.pi * 150 * t)
        metric = noise_metric(t, y, 50.0)
        assert metric.noise_rms <= 1e-9


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        times = np.array([0.0, 1e-4, 2e-4])
        series = TimeSeries(
            times=times,
            currents={"FW1": np.array([0.0, 0.123456789012345, -3.5e-7])},
            voltages={"FW1": np.array([0.0, -1.0 / 3.0, 2.0])},
        )
        path = tmp_path / "run.csv"
        emit_csv(path, series, "FW1")
        t, i, v = read_csv_series(path)
        assert np.array_equal(t, series.times)
        assert np.array_equal(i, series.currents["FW1"])
        assert np.array_equal(v, series.voltages["FW1"])

    def test_empty_series_header_only(self, tmp_path):
        series = TimeSeries(
            times=np.empty(0), currents={"FW1": np.empty(0)}, voltages={"FW1": np.empty(0)}
        )
        path = tmp_path / "empty.csv"
        emit_csv(path, series, "FW1")
        assert path.read_text() == "t,i,v\n"

    def test_two_point_series(self, tmp_path):
        series = TimeSeries(
            times=np.array([0.0, 0.5]),
            currents={"FW1": np.array([1.0, 2.0])},
            voltages={"FW1": np.array([3.0, 4.0])},
        )
        path = tmp_path / "two.csv"
        emit_csv(path, series, "FW1")
        assert path.read_text().count("\n") == 3


class TestSvg:
    def test_deterministic_and_labeled(self, tmp_path):
        t = np.linspace(0.0, 1.0, 50)
        curves = [("a", t, np.sin(t)), ("b", t, np.cos(t))]
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_svg_plot(p1, curves, xlabel="t [s]", ylabel="v [V]")
        emit_svg_plot(p2, curves, xlabel="t [s]", ylabel="v [V]")
        text = p1.read_text()
        assert text == p2.read_text()
        assert text.count("<polyline") == 2
        assert "t [s]" in text and "v [V]" in text

    def test_handles_nonfinite_values(self, tmp_path):
        t = np.linspace(0.0, 1.0, 10)
        y = np.where(t > 0.5, np.inf, 1.0)
        emit_svg_plot(tmp_path / "n.svg", [("d", t, y)], xlabel="x", ylabel="y")
        assert "inf" not in (tmp_path / "n.svg").read_text().split("polyline")[1]


class TestRunners:
    def test_simulate_coarse_deterministic(self):
        cfg = ExperimentConfig(duration=2e-3)
        mesh = build_mesh(cfg, 0)
        system, _, _ = build_system(cfg, mesh)
        s1 = run_transient(cfg, system, "v", "Ge", cfg.dt)
        s2 = run_transient(cfg, system, "v", "Ge", cfg.dt)
        assert np.array_equal(s1.currents["FW1"], s2.currents["FW1"])
        assert s1.diverged_at is None

    def test_classify_report_mentions_both_modes(self):
        text = run_classify(ExperimentConfig(basis_family="hat"))
        assert "mode Ge" in text and "mode G" in text
        assert "inductance-like" in text
        assert "resistance-like" in text
        assert "refinement trend" in text

    def test_unperturbed_source_noise_floor(self):
        # zero perturbation leaves only the physical transient; the slowest
        # device mode decays over ~0.1 s, so a long run is needed before the
        # fitted-harmonic residual reaches the numerical floor
        cfg = ExperimentConfig(perturbation_amplitude=0.0, duration=3.0)
        mesh = build_mesh(cfg, 0)
        system, _, _ = build_system(cfg, mesh)
        for drive in ("i", "v"):
            series = run_transient(cfg, system, drive, "Ge", cfg.dt)
            trace = series.voltages["FW1"] if drive == "i" else series.currents["FW1"]
            metric = noise_metric(series.times, trace, cfg.frequency)
            assert metric.noise_rms <= 1e-9 * metric.fundamental_amplitude

    def test_demo_inductor_orders_and_noise(self):
        text = demo_inductor(ExperimentConfig())
        orders = [
            float(line.rsplit("=", 1)[1])
            for line in text.splitlines()
            if line.strip().startswith("observed order")
        ]
        assert orders and all(0.8 <= o <= 1.2 for o in orders)
        ratio = [
            float(line.rsplit("=", 1)[1])
            for line in text.splitlines()
            if "rms / bound" in line
        ]
        assert ratio and 1.0 / 3.0 <= ratio[0] <= 3.0
