"""Fit orchestration: the complexity-cut x expansion-level sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import screening
from .expansion import (DEFAULT_OPERATORS, MAX_POOL_SIZE, ExpansionError, FeaturePool, OperatorSet,
                        expand_level, initial_pool)
from .exprcore import UnitVector
from .pareto import ParetoFront, update_pareto
from .screening import ScreenConfig
from .sisso import ModelCandidate, SissoError, c2_sisso, intercept_model

logger = logging.getLogger(__name__)


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    """Search hyperparameters.

    ``rmse_stop`` ends the sweep as soon as the front reaches it.
    ``correlation_threshold`` optionally drops near-collinear primary
    features (higher index of each pair) before MI screening.
    ``utopia`` is ``"log"`` (log10 rmse, complexity from 0 bits) or
    ``"linear"`` (plain min-max on both axes).
    """

    n_comp: int = 4
    n_exp: int = 3
    k: int = 20
    T: int = 3
    rmse_stop: Optional[float] = None
    operators: Sequence[str] = DEFAULT_OPERATORS
    screen: ScreenConfig = ScreenConfig()
    seed: int = 0
    max_pool_size: int = MAX_POOL_SIZE
    correlation_threshold: Optional[float] = None
    utopia: str = "log"

    def __post_init__(self):
        for name in ("n_comp", "n_exp", "k", "T", "max_pool_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.rmse_stop is not None and not self.rmse_stop >= 0:
            raise ValueError("rmse_stop must be non-negative")
        if self.utopia not in ("log", "linear"):
            raise ValueError("utopia must be 'log' or 'linear'")
        object.__setattr__(self, "operators", tuple(self.operators))
        OperatorSet.from_names(self.operators)

    def operator_set(self) -> OperatorSet:
        return OperatorSet.from_names(self.operators)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["operators"] = list(self.operators)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if isinstance(d.get("screen"), dict):
            d["screen"] = ScreenConfig(**d["screen"])
        return cls(**d)


@dataclass(frozen=True)
class TraceEntry:
    """One C2-SISSO call of the sweep, ``index = c + n_comp * (level - 1)``."""

    index: int
    c: int
    level: int
    lam: float
    best_rmse: float
    front_rmse: float
    n_tested: int
    error: Optional[str] = None


@dataclass
class FitResult:
    front: ParetoFront
    utopia: ModelCandidate
    models_tested: int
    trace: List[TraceEntry]
    runtime: float
    screened: List[int] = field(default_factory=list)
    mi: List[float] = field(default_factory=list)
    names: Optional[List[str]] = None
    pool_sizes: List[int] = field(default_factory=list)


def schedule_from_complexities(complexities, n_comp: int) -> List[float]:
    """``lambda_c`` keeps the least complex ``1 - (c-1)/n_comp`` fraction."""
    if n_comp < 1:
        raise ValueError("n_comp must be positive")
    cs = np.sort(np.asarray(complexities, dtype=float))
    d = cs.size
    if d == 0:
        raise ValueError("no features to schedule")
    out = []
    for c in range(1, n_comp + 1):
        rank = -(-(n_comp - c + 1) * d // n_comp)  # ceil
        out.append(float(cs[max(rank, 1) - 1]))
    return out


def lambda_schedule(pool: FeaturePool, n_comp: int) -> List[float]:
    """Complexity cuts over the pool's non-intercept features, non-increasing."""
    return schedule_from_complexities(pool.complexities[~pool.intercept_mask], n_comp)


def _check_inputs(data, y):
    data = np.asarray(data, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] < 1:
        raise ValueError("data must be an n x D matrix")
    if data.shape[0] != y.size:
        raise ValueError("data and y row counts differ")
    if y.size < 3:
        raise ValueError("need at least 3 rows")
    if not (np.all(np.isfinite(data)) and np.all(np.isfinite(y))):
        raise ValueError("data and y must be finite")
    return data, y


def _constant_result(y, names, start, log_rmse) -> FitResult:
    model = intercept_model(y)
    front = ParetoFront([model], log_rmse=log_rmse)
    return FitResult(front, model, 0, [], time.perf_counter() - start, names=names)


def fit(data, y, cfg: FitConfig = FitConfig(), units: Optional[Sequence[UnitVector]] = None,
        names: Optional[Sequence[str]] = None) -> FitResult:
    """Run the full search and return the Pareto front and utopia model.

    ``units`` has one entry per data column; ``names`` only affects rendering.
    """
    start = time.perf_counter()
    data, y = _check_inputs(data, y)
    names = list(names) if names is not None else None
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.abs(y).max())):
        return _constant_result(y, names, start, cfg.utopia == "log")

    columns = list(range(data.shape[1]))
    if cfg.correlation_threshold is not None:
        columns = screening.correlation_prefilter(data, cfg.correlation_threshold)
    mi = [s.mi for s in screening.mi_scores(data, y, cfg.seed)]
    sub = np.array([mi[j] for j in columns])
    screened = [columns[j] for j in screening.prescreen(data[:, columns], y, cfg.screen, scores=sub)]

    ops = cfg.operator_set()
    pool = initial_pool(data, screened, ops, units=units)
    front = ParetoFront(log_rmse=cfg.utopia == "log")
    trace: List[TraceEntry] = []
    tested = 0
    sizes = []
    stop = False
    for level in range(1, cfg.n_exp + 1):
        try:
            pool = expand_level(pool, ops, max_pool_size=cfg.max_pool_size)
        except ExpansionError as exc:
            logger.info("expansion stopped at level %d: %s", level, exc)
            break
        sizes.append(len(pool))
        for c, lam in enumerate(lambda_schedule(pool, cfg.n_comp), start=1):
            i = c + cfg.n_comp * (level - 1)
            try:
                res = c2_sisso(y, pool, lam, k=cfg.k, T=cfg.T)
            except SissoError as exc:
                trace.append(TraceEntry(i, c, level, lam, np.inf, front.best_rmse, 0, str(exc)))
                continue
            tested += res.n_tested
            front = update_pareto(front, res.front_candidates())
            trace.append(TraceEntry(i, c, level, lam, res.best_rmse, front.best_rmse, res.n_tested))
            if cfg.rmse_stop is not None and front.best_rmse <= cfg.rmse_stop:
                stop = True
                break
        if stop:
            break
    if not front.entries:
        raise FitError("no model found")
    return FitResult(front, front.utopia, tested, trace, time.perf_counter() - start,
                     screened, mi, names, sizes)


def fit_multi(data, Y, cfg: FitConfig = FitConfig(), units=None,
              names=None) -> List[Union[FitResult, Exception]]:
    """Independent fits per target column; a failing target yields its exception."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[1] < 1:
        raise ValueError("need at least one target")
    out: List[Union[FitResult, Exception]] = []
    for j in range(Y.shape[1]):
        try:
            out.append(fit(data, Y[:, j], cfg, units=units, names=names))
        except (FitError, ValueError, RuntimeError) as exc:
            logger.warning("target %d failed: %s", j, exc)
            out.append(exc)
    return out


def fit_dynamics(states, derivatives, cfg: FitConfig = FitConfig(), names=None):
    """Fit each state derivative as a function of the states."""
    Z = np.asarray(states, dtype=float)
    dZ = np.asarray(derivatives, dtype=float)
    if Z.ndim != 2 or Z.shape != dZ.shape:
        raise ValueError("states and derivatives must be matching r x q matrices")
    if Z.shape[0] < 3:
        raise ValueError("need at least 3 time samples")
    return fit_multi(Z, dZ, cfg, names=names)


def lagged_states(Z, lags: int = 0):
    """Inputs ``[z_k, z_{k-1}, ..., z_{k-lags}]`` and targets ``z_{k+1}``.

    Input columns are grouped by lag (all states at lag 0 first).
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("Z must be an r x q matrix")
    if lags < 0:
        raise ValueError("lags must be non-negative")
    r = Z.shape[0]
    if r - lags - 1 < 1:
        raise ValueError("not enough samples for the requested lags")
    X = np.hstack([Z[lags - j:r - 1 - j] for j in range(lags + 1)])
    return X, Z[lags + 1:]
