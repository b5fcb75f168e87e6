import json

import numpy as np
import pytest

from radonridge.cli import main, run_suite
from radonridge.learner import Dataset


@pytest.fixture
def planted_csv(tmp_path):
    x = np.random.default_rng(0).uniform(0, 1, (20, 2))
    path = tmp_path / "planted.csv"
    Dataset(x, 1 + np.maximum(x[:, 0] - 0.5, 0)).to_csv(path)
    return path


def test_sinogram_command(tmp_path):
    out = tmp_path / "sino"
    assert main(["sinogram", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    peaks = manifest["results"]["peaks"]
    assert [p["eps"] for p in peaks] == [1.0, 0.5, 0.25, 0.125]
    for p in peaks:
        assert p["t"] == pytest.approx(2.0, abs=1e-12) and p["theta"] == 0.0
        assert (out / p["file"]).read_bytes().startswith(b"P5\n180 6401\n255\n")
    vals = [p["value"] for p in peaks]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert manifest["config"]["x0"] == [2.0, 2.0]


def test_sinogram_rejects_bad_eps(tmp_path, capsys):
    assert main(["sinogram", "--eps", "2", "--out", str(tmp_path)]) == 2
    assert "eps" in capsys.readouterr().err


@pytest.mark.parametrize("suite", ["range", "measure-norm"])
def test_check_suites_pass(tmp_path, suite, capsys):
    assert main(["check", suite, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / f"check_{suite}.json").read_text())
    assert report["passed"] and all(c["pass"] for c in report["checks"])
    assert json.loads(capsys.readouterr().out)["suite"] == suite


def test_failed_check_exits_one(tmp_path, monkeypatch):
    from radonridge import cli
    monkeypatch.setitem(cli.SUITES, "range", lambda args: [cli._check("forced", 1.0, 0.0)])
    assert main(["check", "range", "--out", str(tmp_path)]) == 1


def test_fit_command(tmp_path, planted_csv, capsys):
    out = tmp_path / "fit"
    code = main(["fit", str(planted_csv), "--lam", "1e-4", "--dirs", "16", "--atom", "1", "0", "0.5",
                 "--sweep", "1e-4", "1e-2", "1", "--out", str(out)])
    assert code == 0
    fitted = json.loads((out / "fit.json").read_text())
    assert fitted["K0"] <= 3
    assert "K0" in capsys.readouterr().out
    rows = (out / "sweep.tsv").read_text().splitlines()
    assert rows[0] == "lambda\tdata_loss\treg_cost\tK0" and len(rows) == 4


def test_fit_outputs_are_deterministic(tmp_path, planted_csv):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["fit", str(planted_csv), "--lam", "1e-3", "--sweep", "0.01", "0.1", "--out", str(out)]) == 0
        outs.append(((out / "fit.json").read_bytes(), (out / "sweep.tsv").read_bytes()))
    assert outs[0] == outs[1]


def test_fit_large_lambda_is_affine(tmp_path, planted_csv):
    assert main(["fit", str(planted_csv), "--lam", "1e6", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "fit.json").read_text())["network"]["atoms"] == []


def test_fit_empty_csv(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", str(empty), "--out", str(tmp_path)]) == 2
    assert "empty" in capsys.readouterr().err


def test_fit_reports_parse_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,y\n0,0,1\n1,oops,2\n")
    assert main(["fit", str(bad), "--out", str(tmp_path)]) == 2
    assert ":3:" in capsys.readouterr().err


def test_invariance_command(tmp_path, planted_csv):
    assert main(["invariance", str(planted_csv), "--lam", "1e-2", "--atom", "1", "0", "0.5",
                 "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "invariance.json").read_text())
    assert rep["transport_gap"] <= 1e-6


def test_usage_errors_exit_two(tmp_path):
    assert main([]) == 2
    assert main(["check", "nope"]) == 2
    assert main(["fit", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


def test_config_file_defaults_and_flag_precedence(tmp_path, planted_csv):
    conf = tmp_path / "run.conf"
    conf.write_text("# defaults\nlam = 1e6\noffsets = 4\n")
    out = tmp_path / "o"
    assert main(["fit", str(planted_csv), "--config", str(conf), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["lam"] == 1e6 and manifest["config"]["offsets"] == 4
    assert main(["fit", str(planted_csv), "--config", str(conf), "--lam", "0.5", "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["lam"] == 0.5
    conf.write_text("lam\n")
    assert main(["fit", str(planted_csv), "--config", str(conf), "--out", str(out)]) == 2


def test_run_suite_poly():
    assert all(c["pass"] for c in run_suite("poly"))


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "radonridge", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.1.0"
