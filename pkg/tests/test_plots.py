import shutil

from dampedwave.plots import emit_plots, read_csv
from dampedwave.scenarios import write_csv


def _fake_run(path, n=5):
    path.mkdir()
    t = [0.1 * k for k in range(n)]
    write_csv(path / "energy.csv", ["t", "E", "Q", "E_plus_Q", "energy_norm", "sup_u"],
              [[x, 1 - x, x, 1.0, 1.0, 1.0] for x in t])
    write_csv(path / "modulation.csv",
              ["t", "lambda_1", "lambda_2", "d", "a_minus_1", "a_plus_1"],
              [[x, 1.0, 16 - x, 1e-3 * (1 + x), x, -x] for x in t])
    write_csv(path / "virial.csv", ["t", "residual_a", "residual_b"],
              [[x, 1e-4 * (1 + x), 0.0] for x in t])
    return path


def test_plots_written(tmp_path):
    run = _fake_run(tmp_path / "r")
    names = sorted(p.name for p in emit_plots(run))
    assert names == ["a_pm.svg", "d.svg", "energy.svg", "lambda.svg", "virial.svg"]


def test_replot_is_byte_identical(tmp_path):
    a = _fake_run(tmp_path / "a")
    b = tmp_path / "b"
    shutil.copytree(a, b)
    emit_plots(a)
    emit_plots(b)
    for name in ("energy.svg", "d.svg", "lambda.svg", "a_pm.svg", "virial.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_missing_and_empty_csvs(tmp_path):
    run = tmp_path / "r"
    run.mkdir()
    write_csv(run / "energy.csv", ["t", "E", "Q", "E_plus_Q", "energy_norm", "sup_u"], [])
    assert emit_plots(run) == []
    assert not list(run.glob("*.svg"))


def test_read_csv_roundtrip(tmp_path):
    write_csv(tmp_path / "x.csv", ["t", "y"], [[0.0, 2.5], [1.0, -1.0]])
    header, cols = read_csv(tmp_path / "x.csv")
    assert header == ["t", "y"] and list(cols["y"]) == [2.5, -1.0]
