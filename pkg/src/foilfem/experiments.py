"""Experiment configuration, orchestration, metrics and output emission.

The default configuration reproduces the shipped demonstration device: a
50-turn foil winding (fill factor 0.8, 0.28 mm pitch, 50 mm height) in a
gapped core (4.2 mm gap, 76.2 mm yoke height, 40 mm outer radius), driven at
50 Hz with a perturbed sine whose second tone sits at 2*pi*1e10 Hz with
relative amplitude 1e-3.  At the experiment step sizes that tone is far above
the sampling rate, so the perturbation acts as a deterministic sampled noise
floor; this is intentional and drives the sensitivity studies.

All experiment commands are pure functions of the configuration, so reruns
produce bit-identical CSV and SVG output.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .assembly import FieldDiscretization
from .circuit import SourceWaveform, lumped_inductor_voltage_driven, mna_stamp, parse_netlist
from .dae_analysis import classify_element, singular_perturbation_measure
from .errors import ParseError
from .linalg import rank
from .mesh import GeometrySpec, Mesh, generate_parametric_mesh, refine_uniform
from .timestepper import StepperConfig, TimeSeries, integrate
from .winding import (
    FoilWindingSpec,
    VoltageBasis,
    assemble_foil_system,
    device_materials,
    skin_depth_ok,
)

# target edge lengths per mesh level; levels beyond the table halve the last entry
MESH_LEVEL_H = {0: 8.0e-3, 1: 4.0e-3, 2: 1.7e-3, 3: 0.85e-3}
COARSE_LEVEL = 0
FINE_LEVEL = 2


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; defaults describe the reference device (SI units)."""

    n_basis: int = 5
    n_turns: int = 50
    fill_factor: float = 0.8
    foil_pitch: float = 0.28e-3
    winding_height: float = 50.0e-3
    winding_inner_radius: float = 12.6e-3
    air_gap_length: float = 4.2e-3
    yoke_height: float = 76.2e-3
    yoke_outer_radius: float = 40.0e-3
    limb_radius: float = 9.9e-3
    window_outer_radius: float = 29.55e-3
    window_bottom: float = 9.9e-3
    window_top: float = 66.3e-3
    frequency: float = 50.0
    perturbation_frequency: float = 2.0 * math.pi * 1.0e10
    perturbation_amplitude: float = 1.0e-3
    amplitude: float = 1.0
    winding_conductivity: float = 6.0e7
    yoke_conductivity: float = 10.0
    yoke_permeability: float = 1000.0
    drive: str = "v"
    mode: str = "Ge"
    basis_family: str = "legendre"
    mesh_level: int = COARSE_LEVEL
    dt: float = 1.0e-4
    duration: float = 22.0e-3
    seed: int = 0

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {value!r}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("ascii")).hexdigest()


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a flat ``key = value`` config file on top of the defaults."""
    base = base or ExperimentConfig()
    field_types = {f.name: f.type for f in fields(ExperimentConfig)}
    overrides = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", line=line_no)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in field_types:
            raise ParseError(f"unknown configuration key {key!r}", line=line_no)
        kind = field_types[key]
        try:
            if kind == "int":
                overrides[key] = int(value)
            elif kind == "float":
                overrides[key] = float(value)
            else:
                overrides[key] = value
        except ValueError as exc:
            raise ParseError(f"bad value {value!r} for {key}", line=line_no) from exc
    return replace(base, **overrides)


def build_geometry(cfg: ExperimentConfig) -> GeometrySpec:
    return GeometrySpec(
        yoke_outer_radius=cfg.yoke_outer_radius,
        yoke_height=cfg.yoke_height,
        air_gap_length=cfg.air_gap_length,
        limb_radius=cfg.limb_radius,
        window_outer_radius=cfg.window_outer_radius,
        window_bottom=cfg.window_bottom,
        window_top=cfg.window_top,
        winding_inner_radius=cfg.winding_inner_radius,
        winding_thickness=cfg.n_turns * cfg.foil_pitch,
        winding_height=cfg.winding_height,
    )


def build_winding_spec(cfg: ExperimentConfig) -> FoilWindingSpec:
    return FoilWindingSpec(
        n_turns=cfg.n_turns,
        fill_factor=cfg.fill_factor,
        foil_pitch=cfg.foil_pitch,
        height=cfg.winding_height,
        inner_radius=cfg.winding_inner_radius,
        z_center=0.5 * cfg.yoke_height,
        sigma_c=cfg.winding_conductivity,
    )


def mesh_edge_length(level: int) -> float:
    if level in MESH_LEVEL_H:
        return MESH_LEVEL_H[level]
    top = max(MESH_LEVEL_H)
    return MESH_LEVEL_H[top] * 0.5 ** (level - top)


def build_mesh(cfg: ExperimentConfig, level: int | None = None) -> Mesh:
    level = cfg.mesh_level if level is None else level
    return generate_parametric_mesh(build_geometry(cfg), mesh_edge_length(level))


def build_system(cfg: ExperimentConfig, mesh: Mesh):
    spec = build_winding_spec(cfg)
    materials = device_materials(
        spec, yoke_sigma=cfg.yoke_conductivity, yoke_mu_r=cfg.yoke_permeability
    )
    disc = FieldDiscretization.from_mesh(mesh)
    basis = VoltageBasis(cfg.n_basis, family=cfg.basis_family)
    system = assemble_foil_system(mesh, materials=materials, disc=disc, spec=spec, basis=basis)
    return system, spec, basis


def source_line(cfg: ExperimentConfig, drive: str) -> str:
    name = "I1" if drive == "i" else "V1"
    return (
        f"{name} 1 0 PSIN {cfg.amplitude!r} {cfg.frequency!r} "
        f"{cfg.perturbation_amplitude!r} {cfg.perturbation_frequency!r}"
    )


def run_transient(cfg: ExperimentConfig, system, drive: str, mode: str, dt: float) -> TimeSeries:
    """One foil-winding run: compose the two-branch netlist, stamp, integrate."""
    netlist = parse_netlist(f"{source_line(cfg, drive)}\nFW1 1 0 FILE <memory> MODE {mode}")
    dae = mna_stamp(netlist, field_systems={"<memory>": system})
    return integrate(dae, StepperConfig(t0=0.0, t_end=cfg.duration, dt=dt), probe_names=["FW1"])


@dataclass(frozen=True)
class NoiseMetric:
    """Fundamental amplitude and residual noise of one trace.

    The fundamental and its first three harmonics are least-squares fitted
    over the final 60 percent of the run (transient excluded); the noise is
    the RMS of the residual and ``ratio`` its share of the fundamental.
    """

    fundamental_amplitude: float
    noise_rms: float
    ratio: float


def noise_metric(times, values, frequency, n_harmonics: int = 3, tail: float = 0.6) -> NoiseMetric:
    n0 = int(round(len(times) * (1.0 - tail)))
    t = np.asarray(times)[n0:]
    y = np.asarray(values)[n0:]
    columns = [np.ones_like(t)]
    for k in range(1, n_harmonics + 2):
        w = 2.0 * math.pi * k * frequency
        columns.append(np.sin(w * t))
        columns.append(np.cos(w * t))
    design = np.column_stack(columns)
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    amplitude = math.hypot(coeffs[1], coeffs[2])
    residual = y - design @ coeffs
    rms = float(np.sqrt(np.mean(residual**2)))
    ratio = rms / amplitude if amplitude > 0.0 else math.inf
    return NoiseMetric(fundamental_amplitude=amplitude, noise_rms=rms, ratio=ratio)


def run_fig4(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Perturbation-sensitivity study: both drives at two step sizes.

    Uses the consistent conductance on the fine mesh.  The current-driven
    voltage noise grows when the step size shrinks; the voltage-driven
    current noise does not.
    """
    cfg = replace(cfg, mode="Ge")
    mesh = build_mesh(cfg, FINE_LEVEL)
    system, spec, _ = build_system(cfg, mesh)
    results = {"series": {}, "metrics": {}, "skin_depth": skin_depth_ok(spec, cfg.frequency)}
    for drive in ("i", "v"):
        for dt in (1.0e-4, 1.0e-5):
            series = run_transient(cfg, system, drive, "Ge", dt)
            key = f"{drive}fed_dt{dt:.0e}"
            results["series"][key] = series
            probe = series.voltages["FW1"] if drive == "i" else series.currents["FW1"]
            results["metrics"][key] = noise_metric(series.times, probe, cfg.frequency)
    m = results["metrics"]
    results["metrics"]["vnoise_ratio_small_over_large_dt"] = (
        m["ifed_dt1e-05"].noise_rms / m["ifed_dt1e-04"].noise_rms
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for key, series in results["series"].items():
            emit_csv(out / f"fig4_{key}.csv", series, "FW1")
        emit_svg_plot(
            out / "fig4_current_driven.svg",
            [
                (f"dt={dt:.0e} s", results["series"][f"ifed_dt{dt:.0e}"].times,
                 results["series"][f"ifed_dt{dt:.0e}"].voltages["FW1"])
                for dt in (1.0e-5, 1.0e-4)
            ],
            xlabel="t [s]",
            ylabel="v [V]",
        )
        emit_svg_plot(
            out / "fig4_voltage_driven.svg",
            [
                (f"dt={dt:.0e} s", results["series"][f"vfed_dt{dt:.0e}"].times,
                 results["series"][f"vfed_dt{dt:.0e}"].currents["FW1"])
                for dt in (1.0e-5, 1.0e-4)
            ],
            xlabel="t [s]",
            ylabel="i [A]",
        )
        (out / "fig4_metrics.txt").write_text(format_fig4_metrics(results), encoding="ascii")
    return results


def format_fig4_metrics(results) -> str:
    lines = []
    for key in ("ifed_dt1e-04", "ifed_dt1e-05", "vfed_dt1e-04", "vfed_dt1e-05"):
        metric = results["metrics"][key]
        lines.append(
            f"{key}: fundamental = {metric.fundamental_amplitude:.6e}, "
            f"noise_rms = {metric.noise_rms:.6e}, ratio = {metric.ratio:.3e}"
        )
    lines.append(
        "current-driven noise growth (dt 1e-5 / 1e-4) = "
        f"{results['metrics']['vnoise_ratio_small_over_large_dt']:.3f}"
    )
    return "\n".join(lines) + "\n"


def run_fig5(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Conductance-variant comparison across mesh refinement, current-driven.

    Four runs: both conductance variants on the coarse and fine mesh at
    dt = 1e-4 s.  Reported per mesh: the relative RMS discrepancy between the
    two voltage traces and any divergence markers.
    """
    cfg = replace(cfg, drive="i", dt=1.0e-4)
    results = {"series": {}, "discrepancy": {}, "diverged": {}}
    for mesh_name, level in (("coarse", COARSE_LEVEL), ("fine", FINE_LEVEL)):
        mesh = build_mesh(cfg, level)
        system, _, _ = build_system(cfg, mesh)
        pair = {}
        for mode in ("G", "Ge"):
            series = run_transient(cfg, system, "i", mode, cfg.dt)
            results["series"][f"{mesh_name}_{mode}"] = series
            results["diverged"][f"{mesh_name}_{mode}"] = series.diverged_at
            pair[mode] = series
        n = min(len(pair["G"].times), len(pair["Ge"].times))
        v_g = pair["G"].voltages["FW1"][:n]
        v_ge = pair["Ge"].voltages["FW1"][:n]
        ref = float(np.sqrt(np.mean(v_ge**2)))
        results["discrepancy"][mesh_name] = float(np.sqrt(np.mean((v_g - v_ge) ** 2))) / ref
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for key, series in results["series"].items():
            emit_csv(out / f"fig5_{key}.csv", series, "FW1")
        for mesh_name in ("coarse", "fine"):
            s_g = results["series"][f"{mesh_name}_G"]
            s_ge = results["series"][f"{mesh_name}_Ge"]
            emit_svg_plot(
                out / f"fig5_{mesh_name}.svg",
                [
                    ("original G", s_g.times, s_g.voltages["FW1"]),
                    ("consistent Ge", s_ge.times, s_ge.voltages["FW1"]),
                ],
                xlabel="t [s]",
                ylabel="v [V]",
            )
        lines = [
            f"{name}: rel RMS discrepancy = {value:.6e}"
            for name, value in results["discrepancy"].items()
        ]
        lines += [
            f"diverged[{key}] = {step}" for key, step in results["diverged"].items()
        ]
        (out / "fig5_metrics.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    return results


def run_classify(cfg: ExperimentConfig) -> str:
    """Classification report for both conductance variants plus a refinement trend."""
    mesh = build_mesh(cfg)
    system, _, _ = build_system(cfg, mesh)
    lines = [f"mesh level {cfg.mesh_level}: {mesh.n_nodes} nodes, basis {cfg.basis_family}"]
    for mode in ("Ge", "G"):
        cls = classify_element(system, mode)
        lines.append(f"--- mode {mode} ---")
        lines.append(cls.as_report())
    lines.append("--- refinement trend ---")
    m = mesh
    for level in range(3):
        disc = FieldDiscretization.from_mesh(m)
        spec = build_winding_spec(cfg)
        materials = device_materials(
            spec, yoke_sigma=cfg.yoke_conductivity, yoke_mu_r=cfg.yoke_permeability
        )
        basis = VoltageBasis(cfg.n_basis, family=cfg.basis_family)
        sys_l = assemble_foil_system(m, materials=materials, disc=disc, spec=spec, basis=basis)
        measure = singular_perturbation_measure(sys_l.G, sys_l.G_e, sys_l.c)
        lines.append(
            f"refine x{level}: nodes = {m.n_nodes}, frob(G - Ge) = {measure.frob_diff:.6e}, "
            f"rank(X) = {rank(sys_l.X, 1e-10)}"
        )
        if level < 2:
            m = refine_uniform(m)
    return "\n".join(lines) + "\n"


def demo_inductor(cfg: ExperimentConfig) -> str:
    """Lumped-inductor demonstrations: convergence order and noise amplification."""
    l_val = 1.0e-3
    wf = SourceWaveform(kind="sin", amplitude=cfg.amplitude, frequency=cfg.frequency)
    lines = ["voltage-driven inductor, implicit Euler vs closed form:"]
    errors = []
    dts = (1.0e-3, 5.0e-4, 2.5e-4)
    for dt in dts:
        net = parse_netlist(f"V1 1 0 SIN {cfg.amplitude!r} {cfg.frequency!r}\nL1 1 0 {l_val!r}")
        series = integrate(mna_stamp(net), StepperConfig(t0=0.0, t_end=0.02, dt=dt))
        exact = lumped_inductor_voltage_driven(l_val, 0.0, wf, series.times)
        err = float(np.max(np.abs(series.currents["L1"] - exact)))
        errors.append(err)
        lines.append(f"  dt = {dt:.2e}: max error = {err:.6e}")
    for k in range(len(dts) - 1):
        order = math.log(errors[k] / errors[k + 1]) / math.log(dts[k] / dts[k + 1])
        lines.append(f"  observed order ({dts[k]:.0e} -> {dts[k+1]:.0e}) = {order:.3f}")
    dt = cfg.dt
    net = parse_netlist(
        f"I1 1 0 PSIN {cfg.amplitude!r} {cfg.frequency!r} "
        f"{cfg.perturbation_amplitude!r} {cfg.perturbation_frequency!r}\nL1 0 1 {l_val!r}"
    )
    series = integrate(mna_stamp(net), StepperConfig(t0=0.0, t_end=cfg.duration, dt=dt))
    metric = noise_metric(series.times, series.voltages["L1"], cfg.frequency)
    bound = l_val * 2.0 * cfg.perturbation_amplitude / dt
    lines.append("current-driven inductor with perturbed source:")
    lines.append(f"  backward-difference noise bound = {bound:.6e} V")
    lines.append(f"  measured noise RMS = {metric.noise_rms:.6e} V")
    lines.append(f"  rms / bound = {metric.noise_rms / bound:.3f}")
    return "\n".join(lines) + "\n"


def emit_csv(path, series: TimeSeries, probe: str) -> None:
    """Write one probe as ``t,i,v`` rows (full float precision, LF endings)."""
    times, currents, voltages = series.probe(probe)
    lines = ["t,i,v"]
    for t, i, v in zip(times, currents, voltages):
        lines.append(f"{float(t)!r},{float(i)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_csv_series(path):
    """Parse a ``t,i,v`` CSV written by :func:`emit_csv`."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != "t,i,v":
        raise ParseError("missing 't,i,v' header", line=1)
    rows = [tuple(float(tok) for tok in line.split(",")) for line in lines[1:] if line]
    data = np.asarray(rows, dtype=float).reshape(-1, 3)
    return data[:, 0], data[:, 1], data[:, 2]


_SVG_COLORS = ("#1b6ca8", "#c23b22", "#2e8b57", "#8856a7")


def emit_svg_plot(path, curves, xlabel: str, ylabel: str) -> None:
    """Static deterministic SVG line plot: one polyline per labeled curve."""
    width, height, margin = 800, 500, 70
    xs = np.concatenate([np.asarray(c[1], dtype=float) for c in curves])
    ys = np.concatenate([np.asarray(c[2], dtype=float) for c in curves])
    finite = np.isfinite(ys)
    x_min, x_max = float(xs.min()), float(xs.max())
    y_min = float(ys[finite].min()) if finite.any() else -1.0
    y_max = float(ys[finite].max()) if finite.any() else 1.0
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_max = y_min + 1.0
    pad = 0.05 * (y_max - y_min)
    y_min -= pad
    y_max += pad

    def sx(x):
        return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x_min + k * (x_max - x_min) / 4
        yv = y_min + k * (y_max - y_min) / 4
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{height - margin + 20}" font-size="12" '
            f'text-anchor="middle">{xv:.4g}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{sy(yv):.1f}" font-size="12" '
            f'text-anchor="end">{yv:.4g}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.0f}" y="{height - 15}" font-size="14" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="20" y="{height / 2:.0f}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {height / 2:.0f})">{ylabel}</text>'
    )
    for idx, (label, t, y) in enumerate(curves):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(y)
        points = " ".join(f"{sx(tv):.3f},{sy(yv):.3f}" for tv, yv in zip(t[keep], y[keep]))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        ly = margin + 18 * idx
        parts.append(
            f'<line x1="{width - margin - 150}" y1="{ly}" x2="{width - margin - 120}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{width - margin - 112}" y="{ly + 4}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="ascii")
