"""CLI subcommand smoke tests (fast paths; studies run in the acceptance suite)."""

import numpy as np

from foilfem.cli import main
from foilfem.experiments import read_csv_series
from foilfem.mesh import read_mesh
from foilfem.winding import load_system


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    assert code == 0
    return out


class TestMeshCommands:
    def test_gen_info_refine(self, tmp_path, capsys):
        out = run_cli(capsys, "mesh", "gen", "--mesh-level", "0", "--out", str(tmp_path))
        assert "nodes" in out
        mesh_path = tmp_path / "mesh_level0.txt"
        mesh = read_mesh(mesh_path.read_text())
        assert 80 <= mesh.n_nodes <= 150

        info = run_cli(capsys, "mesh", "info", "--mesh", str(mesh_path))
        assert "FOIL_WINDING" in info

        run_cli(capsys, "mesh", "refine", "--mesh", str(mesh_path), "--out", str(tmp_path))
        refined = read_mesh((tmp_path / "mesh_level0_refined.txt").read_text())
        assert refined.n_triangles == 4 * mesh.n_triangles


class TestAssembleCommand:
    def test_assemble_writes_loadable_system(self, tmp_path, capsys):
        out = run_cli(capsys, "assemble", "--mesh-level", "0", "--out", str(tmp_path), "--mtx")
        assert "n_dofs" in out
        system = load_system(tmp_path / "system_level0_legendre.npz")
        assert system.n_basis == 5
        assert (tmp_path / "K.mtx").exists()
        assert (tmp_path / "Ge.mtx").exists()


class TestSimulateCommand:
    def test_simulate_emits_csv_and_svg(self, tmp_path, capsys):
        out = run_cli(
            capsys,
            "simulate",
            "--mesh-level", "0",
            "--drive", "i",
            "--mode", "Ge",
            "--duration", "2e-3",
            "--out", str(tmp_path),
        )
        assert "fundamental" in out
        csv_path = tmp_path / "simulate_ifed_Ge_level0.csv"
        t, i, v = read_csv_series(csv_path)
        assert t.size == 21  # duration 2 ms at dt = 1e-4
        assert np.all(np.isfinite(v))
        assert (tmp_path / "simulate_ifed_Ge_level0.svg").exists()

    def test_config_file_plumbs_through(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("duration = 1e-3\ndrive = i\nmesh_level = 0\n")
        run_cli(capsys, "simulate", "--config", str(cfg_path), "--out", str(tmp_path))
        t, _, _ = read_csv_series(tmp_path / "simulate_ifed_Ge_level0.csv")
        assert t.size == 11


class TestReportCommands:
    def test_classify_runs(self, capsys):
        out = run_cli(capsys, "classify", "--mesh-level", "0", "--basis", "hat")
        assert "resistance-like" in out

    def test_demo_inductor_runs(self, capsys):
        out = run_cli(capsys, "demo-inductor")
        assert "observed order" in out
