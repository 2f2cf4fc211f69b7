import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from cvxeuler.cli import main
from cvxeuler.reports import read_csv
from cvxeuler.snapshot import write_snapshot
from cvxeuler.spectral import Grid3, TimeGrid, zeros

TWO_STAGE = """\
[run]
energy_profile = 40
stages = 2

[scheme]
alpha = 0.05
beta = 0.4
lambdas = 16, 32

[grid]
time_samples = 5

[checks]
decomposition = false
M_probes = 8
"""

SWEEP = """\
[run]
energy_profile = 200
mode = shear_sweep

[sweep]
lambdas = 2, 4, 8, 16
grid_factor = 3
"""

PINNED = Path(__file__).resolve().parents[1] / "src" / "cvxeuler" / "data" / "direction_system.txt"


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("run")
    cfg = write(base / "c.ini", TWO_STAGE)
    assert main(["iterate", str(cfg), "--out", str(base / "out")]) == 0
    return base


class TestIterate:
    def test_layout(self, run_dir):
        out = run_dir / "out"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_text"] == TWO_STAGE
        assert manifest["lambda0"] == 9 and manifest["constants"]["M"] > 1
        for stage in ("stage_001", "stage_002"):
            for name in ("v.cvxf", "p.cvxf", "R.cvxf", "state.json", "report.json", "report.csv"):
                assert (out / stage / name).exists()
        assert (out / "stages.csv").exists()
        assert sorted(p.name for p in (out / "figures").iterdir()) == [
            "stages_contraction.svg", "stages_energy.svg", "stages_rates.svg",
        ]
        state = json.loads((out / "stage_002" / "state.json").read_text())
        assert state["delta"] == 0.25 and state["stage_index"] == 2

    def test_resume_reproduces_last_stage(self, run_dir, capsys):
        copy = run_dir / "resumed"
        shutil.copytree(run_dir / "out", copy)
        shutil.rmtree(copy / "stage_002")
        assert main(["iterate", str(run_dir / "c.ini"), "--out", str(copy)]) == 0
        assert "resuming after stage 1" in capsys.readouterr().out
        for name in ("v.cvxf", "p.cvxf", "R.cvxf", "report.json"):
            assert (copy / "stage_002" / name).read_bytes() == (run_dir / "out" / "stage_002" / name).read_bytes()

    def test_other_config_rejected(self, run_dir):
        other = write(run_dir / "other.ini", TWO_STAGE.replace("stages = 2", "stages = 1"))
        assert main(["iterate", str(other), "--out", str(run_dir / "out")]) == 2

    def test_zero_stages_manifest_only(self, tmp_path):
        cfg = write(tmp_path / "z.ini", TWO_STAGE.replace("stages = 2", "stages = 0"))
        assert main(["iterate", str(cfg), "--out", str(tmp_path / "z")]) == 0
        names = sorted(p.name for p in (tmp_path / "z").iterdir())
        assert "manifest.json" in names
        assert not any(n.startswith("stage_") or n.endswith(".csv") for n in names)

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path / "bad.ini", TWO_STAGE.replace("beta = 0.4", "beta = 0.6"))
        assert main(["iterate", str(cfg)]) == 2
        assert "bad.ini:6:" in capsys.readouterr().err

    def test_precondition_exit_code(self, tmp_path):
        cfg = write(tmp_path / "p.ini", TWO_STAGE.replace("energy_profile = 40", "energy_profile = 1 - t/2"))
        assert main(["iterate", str(cfg), "--out", str(tmp_path / "p")]) == 3
        failure = json.loads((tmp_path / "p" / "stage_002" / "failure.json").read_text())
        assert failure["failure"] == "StagePreconditionError"
        assert (tmp_path / "p" / "stages.csv").exists()


class TestDiagnose:
    def test_energy_of_zero_velocity(self, tmp_path):
        snap = tmp_path / "v.cvxf"
        write_snapshot(snap, zeros(Grid3(8), TimeGrid(5), 1))
        assert main(["diagnose", str(snap), "--what", "energy", "--profile", "1 - t/2"]) == 0
        rows = read_csv(tmp_path / "energy.csv")
        err = {r["t"]: r["value"] for r in rows if r["quantity"] == "error"}
        assert err == {t: 1 - t / 2 for t in np.linspace(0, 1, 5)}

    def test_decomposition_of_stage(self, run_dir, tmp_path):
        assert main(["diagnose", str(run_dir / "out" / "stage_002"), "--what", "decomposition",
                     "--out", str(tmp_path)]) == 0
        rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "decomposition.csv")}
        assert rows["parts_sum_residual"] <= 1e-10
        assert rows["stored_stress_mismatch"] == 0

    def test_holder_and_pressure(self, run_dir, tmp_path):
        stage = run_dir / "out" / "stage_001"
        assert main(["diagnose", str(stage), "--what", "holder", "--out", str(tmp_path)]) == 0
        assert main(["diagnose", str(stage), "--what", "pressure", "--out", str(tmp_path)]) == 0
        rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "pressure.csv")}
        assert rows["identity_residual"] <= 1e-10

    def test_rates_on_sweep(self, tmp_path):
        cfg = write(tmp_path / "s.ini", SWEEP)
        assert main(["iterate", str(cfg), "--out", str(tmp_path / "sweep")]) == 0
        assert main(["diagnose", str(tmp_path / "sweep"), "--what", "rates"]) == 0
        sweep = json.loads((tmp_path / "sweep" / "sweep.json").read_text())
        rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "sweep" / "rates.csv")}
        for name, fit in sweep["fits"].items():
            assert rows[f"slope_{name}"] == fit["fit"]["slope"]
            assert rows[f"residual_{name}"] == fit["fit"]["residual"]

    def test_missing_path(self, tmp_path):
        assert main(["diagnose", str(tmp_path / "nope"), "--what", "energy"]) == 4

    def test_bad_snapshot(self, tmp_path, capsys):
        bad = tmp_path / "v.cvxf"
        bad.write_bytes(b"XXXXXXXX" + bytes(10))
        assert main(["diagnose", str(bad), "--what", "holder"]) == 4
        assert "CVXF0001" in capsys.readouterr().err


class TestPlotAndGeometry:
    def test_plot(self, run_dir, tmp_path):
        assert main(["plot", str(run_dir / "out" / "stages.csv"), "--out", str(tmp_path)]) == 0
        assert len(list(tmp_path.glob("*.svg"))) == 3

    def test_malformed_csv(self, tmp_path):
        bad = write(tmp_path / "bad.csv", "quantity,stage,lambda,mu,t,value\nx,1,2,3,4\n")
        assert main(["plot", str(bad)]) == 4

    def test_geometry_reproduces_pinned_file(self, tmp_path):
        out = tmp_path / "geo.txt"
        assert main(["geometry", "--search-bound", "10", "--out", str(out)]) == 0
        assert out.read_bytes() == PINNED.read_bytes()

    def test_geometry_infeasible(self, tmp_path, capsys):
        assert main(["geometry", "--search-bound", "5", "--out", str(tmp_path / "g.txt")]) == 3
        assert "lambda0=5" in capsys.readouterr().out
