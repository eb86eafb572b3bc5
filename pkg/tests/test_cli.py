import json
import subprocess
import sys

import pytest

from pmclab import experiment as ex
from pmclab.cli import main

BALL = {"metric": {"n": 2}, "R": 0.6, "f": {"kind": "affine", "a": 2.0}}
DISK = {"domain": {"kind": "disk", "R": 0.6}, "f": {"kind": "affine", "a": 2.0}, "solver": {"nr": 8, "ntheta": 32}}


@pytest.fixture
def cfgs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PMCLAB_OUTPUT_DIR", raising=False)
    (tmp_path / "ball.json").write_text(json.dumps(BALL))
    (tmp_path / "disk.json").write_text(json.dumps(DISK))
    return tmp_path


def test_radial_pipeline(cfgs):
    assert main(["solve-radial", "--config", "ball.json", "--out", "sol.csv"]) == 0
    assert (cfgs / "sol.csv").read_text().splitlines()[0] == "rho,u,uprime,w,theta,P"
    assert main(["verify", "--solution", "sol.csv", "--config", "ball.json", "--out", "report.json"]) == 0
    rep = json.loads((cfgs / "report.json").read_text())
    assert rep["status"] == "ok" and abs(rep["hk_margin"]) <= 1e-7


def test_fem_pipeline(cfgs):
    assert main(["mesh", "--config", "disk.json", "--out", "mesh.txt"]) == 0
    assert main(["solve-fem", "--mesh", "mesh.txt", "--config", "disk.json", "--out", "sol.csv"]) == 0
    text = (cfgs / "sol.csv").read_text()
    assert text.startswith("index,x,y,u\n")
    assert "\n\nindex,q,u_nu,w,Htilde\n" in text
    assert main(["verify", "--solution", "sol.csv", "--config", "disk.json", "--mesh", "mesh.txt", "--out", "r.json"]) == 0
    rep = json.loads((cfgs / "r.json").read_text())
    assert abs(rep["compat_residual"]) <= 1e-10


def test_sweep_and_env_override(cfgs, monkeypatch):
    out = cfgs / "outputs"
    monkeypatch.setenv("PMCLAB_OUTPUT_DIR", str(out))
    assert main(["sweep", "--config", "ball.json", "--parameter", "R", "--values", "0.2,0.4", "--out", "s.csv"]) == 0
    lines = (out / "s.csv").read_text().splitlines()
    assert lines[0].split(",") == ex.SWEEP_COLUMNS and len(lines) == 3


def test_exit_codes(cfgs):
    (cfgs / "bad.json").write_text(json.dumps({**BALL, "extra": 1}))
    assert main(["run", "--config", "bad.json"]) == ex.EXIT_CONFIG
    (cfgs / "stiff.json").write_text(json.dumps({**BALL, "R": 1.2}))
    assert main(["run", "--config", "stiff.json", "--out", "r.json"]) == ex.EXIT_SOLVER
    assert json.loads((cfgs / "r.json").read_text())["exit_code"] == ex.EXIT_SOLVER
    (cfgs / "dec.json").write_text(json.dumps({**BALL, "f": {"kind": "affine", "a": 2, "b": -1}}))
    assert main(["run", "--config", "dec.json", "--out", "r.json"]) == ex.EXIT_HYPOTHESIS
    assert main(["mesh", "--config", "ball.json", "--out", "m.txt"]) == ex.EXIT_CONFIG
    (cfgs / "broken.txt").write_text("v 0 0\nz\n")
    assert main(["solve-fem", "--mesh", "broken.txt", "--config", "disk.json", "--out", "x.csv"]) == ex.EXIT_CONFIG


def test_module_entry_point(cfgs):
    res = subprocess.run([sys.executable, "-m", "pmclab.cli", "run", "--config", "ball.json"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["backend"] == "radial"
