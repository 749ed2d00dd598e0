import csv
import json
import os

import numpy as np
import pytest

from sparsesr import benchmarks
from sparsesr.cli import InputError, ingest_csv, main


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


@pytest.fixture
def synth8(tmp_path):
    return benchmarks.write_csv(benchmarks.generate(8, 0), str(tmp_path))


def test_ingest_basic(tmp_path, rng):
    p = write(tmp_path / "d.csv", ["y", "x1", "x2"], rng.normal(size=(10, 3)).tolist())
    X, y, names = ingest_csv(p)
    assert X.shape == (10, 2) and y.shape == (10,) and names == ["x1", "x2"]


def test_ingest_target_elsewhere(tmp_path):
    p = write(tmp_path / "d.csv", ["a", "out", "b"], [[1, 2, 3], [4, 5, 6], [7, 8, 10]])
    X, y, names = ingest_csv(p, "out")
    assert y.tolist() == [2, 5, 8] and names == ["a", "b"] and X[:, 1].tolist() == [3, 6, 10]


def test_ingest_nan_location(tmp_path):
    rows = [[1, 2, 3]] * 3 + [[1, 2, "NaN"]] + [[1, 2, 3]]
    p = write(tmp_path / "d.csv", ["y", "x1", "x2"], rows)
    with pytest.raises(InputError, match="row 4, column x2"):
        ingest_csv(p)


@pytest.mark.parametrize("header,rows,msg", [
    (["a", "b"], [[1, 2]] * 5, "target column 'y'"),
    (["y"], [[1]] * 5, "at least 2 columns"),
    (["y", "x1"], [[1, 2]] * 2, "at least 3 data rows"),
    (["y", "x1"], [[1, "abc"]] * 4, "row 1, column x1"),
    (["y", "x1"], [[1, 2], [1]] * 3, "row 2 has 1 cells"),
])
def test_ingest_errors(tmp_path, header, rows, msg):
    p = write(tmp_path / "d.csv", header, rows)
    with pytest.raises(InputError, match=msg):
        ingest_csv(p)


def test_missing_target_exit_2(tmp_path, rng):
    p = write(tmp_path / "d.csv", ["a", "b"], rng.normal(size=(5, 2)).tolist())
    assert main(["fit", "--input", p, "--out", str(tmp_path / "o")]) == 2


def test_bad_config_exit_2(tmp_path, synth8):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["fit", "--input", synth8, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("{not json")
    assert main(["fit", "--input", synth8, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_fit_failure_exit_1(tmp_path, synth8):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gamma": 50.0}))
    assert main(["fit", "--input", synth8, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_io_errors_exit_3(tmp_path, synth8):
    assert main(["fit", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["fit", "--input", synth8, "--out", str(blocker / "sub")]) == 3


def test_synthetic_8_report(tmp_path, synth8):
    out = tmp_path / "o"
    assert main(["fit", "--input", synth8, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    u = rep["utopia"]
    assert u["r2"] >= 0.999999
    assert "x1" in u["expression"] and ("^ 3" in u["expression"] or "* x1" in u["expression"])
    assert u in rep["pareto"]
    assert not (out / "pareto.svg").exists()
    assert list(rep)[:4] == ["target", "features", "n_rows", "utopia"]
    assert rep["seed"] == 0 and rep["config"]["k"] == 20


def test_report_deterministic_except_runtime(tmp_path, synth8):
    reps = []
    for d in ("a", "b"):
        assert main(["fit", "--input", synth8, "--out", str(tmp_path / d), "--seed", "3"]) == 0
        reps.append((tmp_path / d / "report.json").read_text())
    a, b = (json.loads(r) for r in reps)
    a.pop("runtime_seconds"), b.pop("runtime_seconds")
    assert a == b
    strip = [[ln for ln in r.splitlines() if "runtime_seconds" not in ln] for r in reps]
    assert strip[0] == strip[1]
    assert (tmp_path / "a" / "pareto.csv").read_bytes() == (tmp_path / "b" / "pareto.csv").read_bytes()


def test_report_round_trip_and_csv_order(tmp_path):
    fx = benchmarks.generate(11, 0)
    p = benchmarks.write_csv(fx, str(tmp_path))
    out = tmp_path / "o"
    assert main(["fit", "--input", p, "--out", str(out), "--plot"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert (out / "pareto.svg").read_text().lstrip().startswith("<?xml")
    from sparsesr.driver import FitConfig, fit
    res = fit(fx.X, fx.y, FitConfig())
    assert [(e["rmse"], e["complexity_bits"]) for e in rep["pareto"]] == \
        [(m.rmse, m.complexity) for m in res.front]
    with open(out / "pareto.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["complexity_bits", "rmse", "r2", "expression"]
    c = [float(r["complexity_bits"]) for r in rows]
    r = [float(r["rmse"]) for r in rows]
    assert c == sorted(c) and all(b < a for a, b in zip(r, r[1:]))
    assert all(np.isfinite(v) for v in c + r)


def test_rmse_stop_flag(tmp_path, synth8):
    out = tmp_path / "o"
    assert main(["fit", "--input", synth8, "--out", str(out), "--rmse-stop", "1e-6"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["trace"][-1]["front_rmse"] <= 1e-6
    assert len(rep["trace"]) < 12


def test_units_in_config(tmp_path, rng):
    m = rng.uniform(1, 5, 20)
    v = rng.uniform(1, 5, 20)
    p = write(tmp_path / "d.csv", ["y", "m", "v"], np.column_stack([m * v, m, v]).tolist())
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"units": {"y": "kg*m/s", "m": "kg", "v": "m/s"}}))
    assert main(["fit", "--input", p, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"units": {"m": "kg", "v": "m/s"}, "n_exp": 1}))
    assert main(["fit", "--input", p, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert not any("m + v" in e["expression"] for e in rep["pareto"])


def test_bench_files(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["bench", "--id", "8", "--seed", "0", "--out", str(a)]) == 0
    assert main(["bench", "--id", "8", "--seed", "0", "--out", str(b)]) == 0
    name = benchmarks.fixture_filename(8, 0)
    assert (a / name).read_bytes() == (b / name).read_bytes()
    X, y, names = ingest_csv(str(a / name))
    assert X.shape == (10, 1) and np.allclose(y, X[:, 0] ** 3 + X[:, 0] ** 2 + X[:, 0])
    assert main(["bench", "--id", "1", "--seed", "2", "--out", str(a)]) == 0
    X, y, _ = ingest_csv(str(a / benchmarks.fixture_filename(1, 2)))
    assert X.shape == (10, 5)
    assert main(["bench", "--id", "21", "--out", str(a)]) == 2
    assert main(["bench", "--id", "0", "--out", str(a)]) == 2


def test_dynamics_command(tmp_path):
    t = np.linspace(0, 2, 6)
    Z = np.column_stack([np.exp(-t), 2 * np.exp(-2 * t)])
    s = write(tmp_path / "s.csv", ["z1", "z2"], Z.tolist())
    d = write(tmp_path / "d.csv", ["dz1", "dz2"], (-Z * [1, 2]).tolist())
    out = tmp_path / "o"
    assert main(["dynamics", "--states", s, "--derivs", d, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert [t["target"] for t in rep["targets"]] == ["dz1", "dz2"]
    assert rep["targets"][0]["utopia"]["r2"] > 0.999999
    assert (out / "pareto_dz1.csv").exists() and (out / "pareto_dz2.csv").exists()
    bad = write(tmp_path / "bad.csv", ["dz1"], [[1]] * 6)
    assert main(["dynamics", "--states", s, "--derivs", bad, "--out", str(out)]) == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2
