"""Command-line front end: CSV ingestion, fitting, reports and fixtures."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import benchmarks
from .driver import FitConfig, FitResult, fit, fit_dynamics
from .exprcore import parse_units
from .screening import ScreenConfig
from .sisso import ModelCandidate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FIT = 1
EXIT_INPUT = 2
EXIT_IO = 3


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


@dataclass
class RunConfig:
    input: Optional[str] = None
    target: str = "y"
    units: Optional[Dict[str, str]] = None
    dims: Optional[List[str]] = None
    fit: FitConfig = field(default_factory=FitConfig)
    out: str = "out"
    plot: bool = False
    command: str = "fit"


# ---------------------------------------------------------------------------
# Input
# ---------------------------------------------------------------------------


def read_table(path: str) -> Tuple[List[str], np.ndarray]:
    """Header names and a float matrix; rejects non-finite or non-numeric cells."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise InputError(f"{path}: empty column name in header")
    if len(set(header)) != len(header):
        raise InputError(f"{path}: duplicate column names in header")
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise InputError(f"{path}: header row missing (first cell {header[0]!r} is numeric)")
    body = rows[1:]
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise InputError(f"{path}: row {r}, column {header[c]}: {cell.strip()!r} is not a finite number")
            values[r - 1, c] = v
    return header, values


def ingest_csv(path: str, target: str = "y") -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """``(features, target, feature names)`` from a CSV file with a header row."""
    header, values = read_table(path)
    if len(header) < 2:
        raise InputError(f"{path}: need at least 2 columns")
    if target not in header:
        raise InputError(f"{path}: target column {target!r} not in header {header}")
    if values.shape[0] < 3:
        raise InputError(f"{path}: need at least 3 data rows, found {values.shape[0]}")
    j = header.index(target)
    names = [h for i, h in enumerate(header) if i != j]
    return np.delete(values, j, axis=1), values[:, j].copy(), names


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return cfg


_SCREEN_KEYS = {f.name for f in fields(ScreenConfig)}
_FIT_KEYS = {f.name for f in fields(FitConfig)}
_RUN_KEYS = {"target", "units", "dims", "out", "plot"}


def build_run_config(args: argparse.Namespace, raw: dict) -> RunConfig:
    raw = dict(raw)
    screen = dict(raw.pop("screen", {}) or {})
    for k in list(raw):
        if k in _SCREEN_KEYS:
            screen[k] = raw.pop(k)
    unknown = set(raw) - _FIT_KEYS - _RUN_KEYS
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    fit_kw = {k: raw[k] for k in _FIT_KEYS & set(raw)}
    try:
        fit_kw["screen"] = ScreenConfig(**screen)
        cfg = FitConfig(**fit_kw)
    except (TypeError, ValueError, KeyError) as exc:
        raise InputError(f"invalid config: {exc}") from None
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "rmse_stop", None) is not None:
        try:
            cfg = replace(cfg, rmse_stop=args.rmse_stop)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    target = args.target if getattr(args, "target", None) is not None else raw.get("target", "y")
    out = args.out if getattr(args, "out", None) is not None else raw.get("out", "out")
    return RunConfig(
        input=getattr(args, "input", None),
        target=target,
        units=raw.get("units"),
        dims=raw.get("dims"),
        fit=cfg,
        out=out,
        plot=bool(getattr(args, "plot", False) or raw.get("plot", False)),
        command=args.command,
    )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def model_entry(m: ModelCandidate, names: Optional[Sequence[str]]) -> dict:
    return {
        "expression": m.render(names),
        "canonical": m.expression.canonical,
        "tree": m.expression.to_prefix(),
        "complexity_bits": float(m.complexity),
        "rmse": float(m.rmse),
        "mse": float(m.mse),
        "r2": float(m.r2),
        "features": [e.render(names) for e in m.feature_exprs],
        "coefficients": [float(c) for c in m.coefficients],
        "intercept": float(m.intercept),
    }


def build_report(res: FitResult, names: Sequence[str], target: str, cfg: FitConfig, n_rows: int) -> dict:
    return {
        "target": target,
        "features": list(names),
        "n_rows": int(n_rows),
        "utopia": model_entry(res.utopia, names),
        "pareto": [model_entry(m, names) for m in res.front],
        "screening": {
            "mode": cfg.screen.mode,
            "gamma": cfg.screen.gamma,
            "percentile": cfg.screen.percentile,
            "n_screen": cfg.screen.n_screen,
            "mi": {names[i]: float(v) for i, v in enumerate(res.mi)},
            "selected": [names[i] for i in res.screened],
        },
        "models_tested": int(res.models_tested),
        "pool_sizes": [int(s) for s in res.pool_sizes],
        "trace": [
            {"index": t.index, "c": t.c, "level": t.level, "lambda": _num(t.lam),
             "best_rmse": _num(t.best_rmse), "front_rmse": _num(t.front_rmse),
             "n_tested": t.n_tested, "error": t.error}
            for t in res.trace
        ],
        "runtime_seconds": float(res.runtime),
        "config": cfg.to_dict(),
        "seed": int(cfg.seed),
    }


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_pareto_csv(path: str, res: FitResult, names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["complexity_bits", "rmse", "r2", "expression"])
        for m in res.front:
            w.writerow([repr(float(m.complexity)), repr(float(m.rmse)), repr(float(m.r2)), m.render(names)])


def write_pareto_svg(path: str, res: FitResult, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "sparsesr"
    pts = res.front.points()
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    ax.plot(pts[:, 0], pts[:, 1], "o-", color="tab:blue", label="Pareto front")
    ax.plot([res.utopia.complexity], [res.utopia.rmse], "*", color="tab:red", markersize=14,
            label="utopia model")
    if np.all(pts[:, 1] > 0):
        ax.set_yscale("log")
    ax.set_xlabel("structural complexity (bits)")
    ax.set_ylabel("training RMSE")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _units(rc: RunConfig, names: Sequence[str]):
    if not rc.units:
        return None
    unknown = set(rc.units) - set(names)
    if unknown:
        raise InputError(f"units given for unknown columns: {', '.join(sorted(unknown))}")
    try:
        units, _ = parse_units(rc.units, names, rc.dims)
    except (ValueError, KeyError) as exc:
        raise InputError(f"invalid units: {exc}") from None
    return units


def _emit(res: FitResult, names, target, rc: RunConfig, n_rows, suffix: str = "") -> dict:
    report = build_report(res, names, target, rc.fit, n_rows)
    write_pareto_csv(os.path.join(rc.out, f"pareto{suffix}.csv"), res, names)
    if rc.plot:
        write_pareto_svg(os.path.join(rc.out, f"pareto{suffix}.svg"), res, target)
    return report


def run_fit(rc: RunConfig) -> dict:
    """Fit one target and write ``report.json``, ``pareto.csv`` and optionally ``pareto.svg``."""
    X, y, names = ingest_csv(rc.input, rc.target)
    units = _units(rc, names)
    res = fit(X, y, rc.fit, units=units, names=names)
    os.makedirs(rc.out, exist_ok=True)
    report = _emit(res, names, rc.target, rc, len(y))
    write_json(os.path.join(rc.out, "report.json"), report)
    return report


def run_dynamics(rc: RunConfig, states: str, derivs: str) -> Tuple[dict, bool]:
    """One fit per derivative column; returns the report and whether all succeeded."""
    s_names, Z = read_table(states)
    d_names, dZ = read_table(derivs)
    if Z.shape != dZ.shape:
        raise InputError(f"states {Z.shape} and derivatives {dZ.shape} must have the same shape")
    if Z.shape[0] < 3:
        raise InputError("need at least 3 time samples")
    results = fit_dynamics(Z, dZ, rc.fit, names=s_names)
    os.makedirs(rc.out, exist_ok=True)
    targets, ok = [], True
    for name, res in zip(d_names, results):
        if isinstance(res, Exception):
            ok = False
            targets.append({"target": name, "error": str(res)})
        else:
            targets.append(_emit(res, s_names, name, rc, Z.shape[0], suffix=f"_{name}"))
    report = {"targets": targets, "config": rc.fit.to_dict(), "seed": int(rc.fit.seed)}
    write_json(os.path.join(rc.out, "report.json"), report)
    return report, ok


def bench_generate(problem_id: int, seed: int, out: str) -> str:
    try:
        benchmarks.get_problem(problem_id)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    return benchmarks.write_csv(benchmarks.generate(problem_id, seed), out)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with FitConfig/ScreenConfig fields")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--plot", action="store_true", help="also write pareto.svg")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--rmse-stop", type=float, dest="rmse_stop", help="stop once the front reaches this rmse")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sparsesr", description="Sparse symbolic regression with a Pareto front.")
    sub = p.add_subparsers(dest="command", required=True)
    f = sub.add_parser("fit", parents=[common], help="fit a CSV dataset")
    f.add_argument("--input", required=True, help="CSV file with a header row")
    f.add_argument("--target", help="target column (default: y)")
    b = sub.add_parser("bench", help="write a benchmark fixture CSV")
    b.add_argument("--id", type=int, required=True, dest="problem_id", help="problem id 1..20")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=".", help="output directory")
    d = sub.add_parser("dynamics", parents=[common], help="fit state derivatives from states")
    d.add_argument("--states", required=True, help="CSV of states, one column per state")
    d.add_argument("--derivs", required=True, help="CSV of time derivatives, aligned rows")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            print(bench_generate(args.problem_id, args.seed, args.out))
            return EXIT_OK
        rc = build_run_config(args, load_config(args.config))
        if args.command == "fit":
            report = run_fit(rc)
            u = report["utopia"]
            print(f"utopia: {u['expression']}  rmse={u['rmse']:.6g}  r2={u['r2']:.6g}  "
                  f"complexity={u['complexity_bits']:.4g} bits")
            return EXIT_OK
        _, ok = run_dynamics(rc, args.states, args.derivs)
        return EXIT_OK if ok else EXIT_FIT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # algorithmic failure inside the fit
        logger.debug("fit failure", exc_info=True)
        print(f"error: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
