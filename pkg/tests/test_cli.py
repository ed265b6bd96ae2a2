import json
from pathlib import Path

import pytest

from pucciflow import __version__
from pucciflow.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_help_defaults_and_version(capsys):
    assert main(["--help", "defaults"]) == EXIT_OK
    assert "time.t_end" in capsys.readouterr().out
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_eigen_writes_outputs(tmp_path):
    cfg = write(tmp_path, "domain.shape = interval\ndomain.length = pi\ngrid.h = pi/64\n")
    out = tmp_path / "out"
    assert main(["eigen", cfg, "--out", str(out)]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "eigen" and man["version"] == __version__
    assert (out / "resolved.cfg").exists()
    eig = json.loads(next(out.rglob("eigen.json")).read_text())
    assert eig["mu"] == pytest.approx(1.0, rel=1e-3)
    # refuses to overwrite without --force
    assert main(["eigen", cfg, "--out", str(out)]) == EXIT_USAGE
    assert main(["eigen", cfg, "--out", str(out), "--force"]) == EXIT_OK


def test_evolve_and_report(tmp_path):
    cfg = write(tmp_path, "domain.shape = interval\ndomain.length = 1\nm = 2\ngrid.h = 1/32\n"
                          "time.t_end = 0.5\ntime.snap = 0.25\n")
    runs = tmp_path / "runs"
    assert main(["evolve", cfg, "--out", str(runs / "a")]) == EXIT_OK
    assert list((runs / "a").rglob("snapshot_00002_w.csv"))
    assert main(["report", str(runs)]) == EXIT_OK
    summary = json.loads((runs / "summary.json").read_text())
    assert summary["runs"][0]["command"] == "evolve"


def test_concavity_check_fails_on_log_convex(tmp_path):
    out = tmp_path / "c"
    assert main(["check", "concavity", str(CONFIGS / "logconvex.cfg"), "--out", str(out)]) == EXIT_CHECK
    assert json.loads((out / "manifest.json").read_text())["passed"] is False


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "m = 2\nwhat = 1\n")
    assert main(["evolve", cfg, "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    assert main(["evolve", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_experiment_command(tmp_path, capsys):
    assert main(["experiment", "domain-scaling", "--out", str(tmp_path / "e")]) == EXIT_OK
    assert "PASS domain-scaling" in capsys.readouterr().out
    assert main(["experiment", "nope", "--out", str(tmp_path / "f")]) == EXIT_USAGE
    assert "linear-1d-laplacian" in capsys.readouterr().err


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PUCCIFLOW_OUTPUT", str(tmp_path / "envout"))
    cfg = write(tmp_path, "domain.shape = interval\ndomain.length = pi\ngrid.h = pi/32\n", "tiny.cfg")
    assert main(["eigen", cfg]) == EXIT_OK
    assert (tmp_path / "envout" / "eigen-tiny" / "manifest.json").exists()
