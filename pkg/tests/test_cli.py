import json

import pytest

from dampedwave.cli import main


def test_list(capsys):
    assert main(["list"]) == 0
    assert "twobubble-attract-d6" in capsys.readouterr().out


def test_verify_constants_d6_reports_failures(capsys):
    assert main(["verify-constants", "--dim", "6"]) == 2
    out = capsys.readouterr().out
    assert "omega^2 (exact)" in out and "FAIL" in out


def test_verify_constants_bad_dim():
    assert main(["verify-constants", "--dim", "9"]) == 1


def test_spectral(capsys, tmp_path):
    assert main(["spectral", "--dim", "6", "--N", "512", "--cache", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "kappa = 0.53126" in out and "negative eigenvalues = 1" in out
    assert list(tmp_path.iterdir())


def test_run_and_plots(tmp_path, capsys):
    doc = {"schema": "dampedwave.scenario/1", "name": "c", "D": 6, "alpha": 1.0,
           "t_end": 0.5, "grid": {"N": 512, "r_max": 50.0},
           "data": {"type": "gaussian", "amp": 0.1, "center": 5.0, "width": 1.0}}
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    (out / "energy.svg").unlink()
    assert main(["plots", str(out)]) == 0
    assert (out / "energy.svg").exists()


def test_run_invalid_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"schema": "dampedwave.scenario/1", "D": 6}))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_missing_file():
    assert main(["run", "/nonexistent/x.json"]) == 1


def test_unknown_verb():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
