import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from changesurface.cli import main, parse_config, read_config
from changesurface.grid import GridDataset, load_csv, save_csv
from changesurface.logdet import BENCH_COLUMNS
from changesurface.model import nmse

TINY = ["--g", "1", "--h", "2", "--partial-iters", "3", "--init-iters", "5", "--max-iter", "20"]


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nseed = 4\nq=2  # inline\nsort-line = true\nsizes = 64, 128\n")
    cfg = parse_config(["synthetic", "--config", str(cfg_file), "--seed", "9"])
    assert (cfg.seed, cfg.q, cfg.sort_line, tuple(cfg.sizes)) == (9, 2, True, (64, 128))
    assert read_config(cfg_file)["seed"] == 4


@pytest.mark.parametrize("argv", [["bogus"], ["synthetic", "--nope"], ["fit"],
                                  ["synthetic", "--strategy", "fast"], ["predict", "x.csv"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_bad_config_key_exit_2(tmp_path):
    (tmp_path / "c.cfg").write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        main(["synthetic", "--config", str(tmp_path / "c.cfg")])
    assert exc.value.code == 2


def test_pipeline_error_exit_1(tmp_path):
    (tmp_path / "d.csv").write_text("a,y\n0,1\n0,2\n")
    assert main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o")]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "changesurface.cli", "bogus"], capture_output=True)
    assert proc.returncode == 2 and b"usage" in proc.stderr


def smooth_grid(path, noise=0.0):
    ax = np.linspace(0, 1, 8)
    x1, x2 = np.meshgrid(ax, ax, indexing="ij")
    y = np.sin(3 * x1) + np.cos(2 * x2) + noise * np.random.default_rng(0).normal(size=x1.shape)
    data = GridDataset([ax, ax], y.ravel(), ("lat", "t"))
    save_csv(data, path)
    return data


def test_fit_then_predict(tmp_path):
    data = smooth_grid(tmp_path / "d.csv")
    assert main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path / "f"), "--q", "2"] + TINY) == 0
    for name in ("model.json", "init_report.txt", "fit_report.json"):
        assert (tmp_path / "f" / name).exists()
    rep = json.loads((tmp_path / "f" / "fit_report.json").read_text())
    assert rep["objective"] <= rep["initial_objective"]
    assert main(["predict", str(tmp_path / "d.csv"), "--model", str(tmp_path / "f" / "model.json"),
                 "--with-var", "--time-axis", "1", "--out", str(tmp_path / "p")]) == 0
    head, rows = read(tmp_path / "p" / "predictions.csv")
    assert head == ["lat", "t", "mean", "variance"]
    pred = np.array(rows, float)
    np.testing.assert_array_equal(pred[:, :2], data.points())
    assert nmse(data.y, pred[:, 2], data.y.mean()) < 1e-3
    assert np.all(pred[:, 3] >= 0)
    head, rows = read(tmp_path / "p" / "midpoints.csv")
    assert head == ["lat", "midpoint", "slope", "duration", "crossed"] and len(rows) == 8


def test_predict_points_file_and_reload(tmp_path):
    smooth_grid(tmp_path / "d.csv", noise=0.1)
    main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path / "f"), "--q", "1"] + TINY)
    (tmp_path / "pts.csv").write_text("lat,t\n0.05,0.5\n0.33,0.91\n")
    args = ["predict", str(tmp_path / "d.csv"), "--model", str(tmp_path / "f" / "model.json"),
            "--points", str(tmp_path / "pts.csv")]
    main(args + ["--out", str(tmp_path / "p1")])
    main(args + ["--out", str(tmp_path / "p2")])
    _, a = read(tmp_path / "p1" / "predictions.csv")
    _, b = read(tmp_path / "p2" / "predictions.csv")
    assert a == b and len(a) == 2


def test_midpoint_schema_3d(tmp_path):
    # spatio-temporal layout: (state, region, year), change along the year axis
    rng = np.random.default_rng(0)
    axes = [np.arange(3.0), np.arange(2.0), np.linspace(1950, 1970, 11)]
    shape = tuple(a.size for a in axes)
    years = np.broadcast_to(axes[2], shape)
    y = np.where(years < 1962, 2.0, 0.5) + 0.2 * rng.normal(size=shape)
    save_csv(GridDataset(axes, y.ravel(), ("state", "region", "year")), tmp_path / "d.csv", "cases")
    assert main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path / "f"), "--q", "1"] + TINY) == 0
    assert main(["predict", str(tmp_path / "d.csv"), "--model", str(tmp_path / "f" / "model.json"),
                 "--time-axis", "2", "--out", str(tmp_path / "p")]) == 0
    head, rows = read(tmp_path / "p" / "midpoints.csv")
    assert head == ["state", "region", "midpoint", "slope", "duration", "crossed"]
    assert len(rows) == 6
    assert sorted((float(r[0]), float(r[1])) for r in rows) == [(s, g) for s in range(3) for g in range(2)]
    for r in rows:
        assert r[5] in ("0", "1")
        if r[5] == "1":
            assert 1950 <= float(r[2]) <= 1970


def test_synthetic_outputs_and_determinism(tmp_path):
    args = ["synthetic", "--restarts", "1", "--g", "1", "--h", "1", "--partial-iters", "1",
            "--init-iters", "1", "--max-iter", "2", "--no-ablation", "--seed", "11"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    head, rows = read(tmp_path / "a" / "pred_surface.csv")
    sig = np.array(rows, float)[:, 2]
    assert head == ["x1", "x2", "sigma"] and len(rows) == 2500
    assert np.all((sig > 0) & (sig < 1))
    _, pred = read(tmp_path / "a" / "predictions.csv")
    assert len(pred) == 250
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert np.isfinite(summary["mean_nmse"])
    assert load_csv(tmp_path / "a" / "data.csv", 2).n == 2500
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("pred_surface.csv", "predictions.csv", "true_surface.csv", "model.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_benchmark_command(tmp_path):
    assert main(["benchmark-logdet", "--sizes", "64,128", "--out", str(tmp_path)]) == 0
    head, rows = read(tmp_path / "benchmark_logdet.csv")
    assert head == BENCH_COLUMNS
    assert {r[2] for r in rows if r[1] == "3"} == {"dense", "exact-weyl", "middle", "greedy:40"}
    assert (tmp_path / "plot_benchmark.py").exists()


def test_coal_command_outputs(tmp_path):
    assert main(["coal", "--out", str(tmp_path), "--q", "2"] + TINY) == 0
    head, rows = read(tmp_path / "coal_surface.csv")
    assert head == ["year", "count", "cumulative", "sigma"] and len(rows) == 112
    summary = json.loads((tmp_path / "coal_summary.json").read_text())
    assert summary["act_year"] == 1887 and summary["years"] == [1851.0, 1962.0]
    assert "1887" in (tmp_path / "plot_coal.py").read_text() or "act_year" in (tmp_path / "plot_coal.py").read_text()
