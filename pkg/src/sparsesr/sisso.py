"""Complexity-constrained sure independence screening with exhaustive l0 fits."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exprcore as ec
from .exprcore import Expression
from .expansion import FeaturePool, complexity_filter_index

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
EXACT_FIT_TOL = 1e-12
RMSE_TIE_TOL = 1e-12
SIS_ZERO_TOL = 1e-12
BATCH_SIZE = 4096


class SissoError(RuntimeError):
    pass


@dataclass
class ModelCandidate:
    """A fitted sparse linear model over library features.

    ``features`` index the pool the model was fitted on; ``feature_exprs``
    keep the model meaningful without that pool.
    """

    features: Tuple[int, ...]
    feature_exprs: Tuple[Expression, ...]
    coefficients: np.ndarray
    intercept: float
    rmse: float
    r2: float
    complexity: float
    expression: Expression
    level: int = 0
    n_rows: int = 0

    @property
    def n_terms(self) -> int:
        return len(self.features)

    @property
    def key(self) -> str:
        """Structure identity: the sorted feature strings, coefficients ignored."""
        return " + ".join(sorted(e.canonical for e in self.feature_exprs))

    @property
    def mse(self) -> float:
        return self.rmse ** 2

    def predict(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        out = np.full(data.shape[0], self.intercept, dtype=float)
        for c, e in zip(self.coefficients, self.feature_exprs):
            col = ec.evaluate(e, data)
            if col is None:
                raise ValueError(f"feature {e} is invalid on the given data")
            out = out + c * col
        return out

    def render(self, names: Optional[Sequence[str]] = None) -> str:
        return self.expression.render(names)

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        return {
            "expression": self.render(names),
            "canonical": self.expression.canonical,
            "tree": self.expression.to_prefix(),
            "features": [e.render(names) for e in self.feature_exprs],
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "complexity": float(self.complexity),
            "rmse": float(self.rmse),
            "mse": float(self.mse),
            "r2": float(self.r2),
        }


def assemble(coefficients: Sequence[float], intercept: float, feature_exprs: Sequence[Expression]) -> Expression:
    """``c1*f1 + ... + ct*ft + c0`` as one expression tree."""
    expr = None
    for c, f in zip(coefficients, feature_exprs):
        term = ec.binary("mul", ec.const(float(c)), f)
        expr = term if expr is None else ec.binary("add", expr, term)
    if expr is None:
        return ec.const(float(intercept))
    return ec.binary("add", expr, ec.const(float(intercept)))


def r2_score(y: np.ndarray, ssr: float) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 1.0 if ssr <= EXACT_FIT_TOL else 0.0
    return 1.0 - ssr / sst


def model_complexity(pool: FeaturePool, combos: np.ndarray) -> np.ndarray:
    """Assembled-model bits for each row of ``combos`` (pool indices).

    Each term adds one multiplication (its coefficient) and one addition
    (joining the next term or the intercept).
    """
    combos = np.atleast_2d(np.asarray(combos, dtype=np.int64))
    t = combos.shape[1]
    counts = pool.counts[combos].sum(axis=1).astype(np.int64)
    if t:
        counts[:, pool.symbol_index("mul")] += t
        counts[:, pool.symbol_index("add")] += t
    return ec.bits_array(counts.sum(axis=1), np.count_nonzero(counts, axis=1))


# ---------------------------------------------------------------------------
# SIS
# ---------------------------------------------------------------------------


def sis(target, pool: FeaturePool, k: int, exclude: Sequence[int] = (),
        candidates: Optional[Sequence[int]] = None) -> List[int]:
    """Indices of the ``k`` eligible columns with the largest ``|z_i . target|``.

    ``z`` are standardized pool columns; the intercept and constant columns
    are never eligible.  ``candidates`` restricts the search (e.g. to a
    complexity-filtered view).  Ties go to the lower index.
    """
    if k < 1:
        raise ValueError("k must be positive")
    z, ok = pool.standardized()
    eligible = ok.copy()
    if candidates is not None:
        allowed = np.zeros_like(eligible)
        allowed[np.asarray(candidates, dtype=int)] = True
        eligible &= allowed
    if len(exclude):
        eligible[np.asarray(list(exclude), dtype=int)] = False
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        raise SissoError("no eligible feature for SIS")
    target = np.asarray(target, dtype=float)
    scale = np.max(np.abs(target))
    if scale > 0:
        target = target / scale
    w = np.abs(z[:, idx].T @ target)
    # Zero-mean columns against an orthogonal target leave rounding noise; read it as 0.
    w[w <= SIS_ZERO_TOL * np.sqrt(target.size) * np.linalg.norm(target)] = 0.0
    order = np.lexsort((idx, -w))
    return [int(i) for i in idx[order[:k]]]


# ---------------------------------------------------------------------------
# l0 regression
# ---------------------------------------------------------------------------


def batched_lstsq(X: np.ndarray, y: np.ndarray, rank_tol: float = RANK_TOL):
    """Least squares for a stack of design matrices ``X`` (b x n x p).

    Columns are scaled to unit norm, then factored with QR.  Systems whose
    triangular factor has a diagonal entry below ``rank_tol`` times the
    largest one are reported unsolvable.  Returns ``(coef, ssr, ok)``.
    """
    b, n, p = X.shape
    coef = np.zeros((b, p))
    ssr = np.full(b, np.inf)
    ok = np.zeros(b, dtype=bool)
    if n < p or b == 0:
        return coef, ssr, ok
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.linalg.norm(X, axis=1)
    good = np.all(norms > 0, axis=1) & np.all(np.isfinite(norms), axis=1)
    if not good.any():
        return coef, ssr, ok
    Xg = X[good] / norms[good][:, None, :]
    Q, R = np.linalg.qr(Xg)
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    full = np.all(diag > rank_tol * diag.max(axis=1, keepdims=True), axis=1)
    gi = np.flatnonzero(good)[full]
    if gi.size:
        qty = np.einsum("bnp,n->bp", Q[full], y)
        c = np.linalg.solve(R[full], qty[..., None])[..., 0]
        c = c / norms[gi]
        resid = y[None, :] - np.einsum("bnp,bp->bn", X[gi], c)
        coef[gi] = c
        ssr[gi] = np.einsum("bn,bn->b", resid, resid)
        ok[gi] = True
    return coef, ssr, ok


@dataclass
class L0Scan:
    """Every model of one l0 sweep: index tuples, rmse and complexity."""

    t: int
    combos: np.ndarray
    rmse: np.ndarray
    complexity: np.ndarray
    best: int

    @property
    def n_tested(self) -> int:
        return self.combos.shape[0]


def _combos(subspace: Sequence[int], t: int) -> np.ndarray:
    sub = np.asarray(sorted(subspace), dtype=np.int64)
    if t == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(sub.size), t)),
                      dtype=np.int64, count=comb(sub.size, t) * t)
    return sub[idx.reshape(-1, t)]


def l0_scan(y, pool: FeaturePool, subspace: Sequence[int], t: int,
            batch_size: int = BATCH_SIZE) -> L0Scan:
    y = np.asarray(y, dtype=float)
    if t < 1 or t > len(subspace):
        raise ValueError("need 1 <= t <= |subspace|")
    combos = _combos(subspace, t)
    n = y.size
    rmse = np.full(combos.shape[0], np.inf)
    cols = pool.columns
    ones = np.ones((1, n, 1))
    for s in range(0, combos.shape[0], batch_size):
        block = combos[s:s + batch_size]
        X = np.concatenate([np.broadcast_to(ones, (block.shape[0], n, 1)),
                            np.transpose(cols[:, block], (1, 0, 2))], axis=2)
        _, ssr, ok = batched_lstsq(X, y)
        rmse[s:s + block.shape[0]][ok] = np.sqrt(ssr[ok] / n)
    solvable = np.isfinite(rmse)
    if not solvable.any():
        raise SissoError(f"no solvable {t}-term model")
    cplx = model_complexity(pool, combos)
    best_rmse = rmse[solvable].min()
    tied = np.flatnonzero(solvable & (rmse <= best_rmse + RMSE_TIE_TOL))
    best = int(tied[np.lexsort((tied, cplx[tied]))[0]])
    return L0Scan(t, combos, rmse, cplx, best)


def fit_model(y, pool: FeaturePool, combo: Sequence[int]) -> ModelCandidate:
    """Least-squares model with intercept on the given pool columns."""
    y = np.asarray(y, dtype=float)
    combo = tuple(int(i) for i in combo)
    n = y.size
    X = np.column_stack([np.ones(n)] + [pool.columns[:, i] for i in combo])[None]
    coef, ssr, ok = batched_lstsq(X, y)
    if not ok[0]:
        raise SissoError(f"rank-deficient model {combo}")
    c = coef[0]
    exprs = tuple(pool.features[i].expr for i in combo)
    complexity = float(model_complexity(pool, np.array([combo], dtype=np.int64).reshape(1, -1))[0])
    expr = assemble(c[1:], c[0], exprs)
    level = max((pool.features[i].level for i in combo), default=0)
    return ModelCandidate(
        features=combo,
        feature_exprs=exprs,
        coefficients=c[1:].copy(),
        intercept=float(c[0]),
        rmse=float(np.sqrt(ssr[0] / n)),
        r2=r2_score(y, float(ssr[0])),
        complexity=complexity,
        expression=expr,
        level=level,
        n_rows=n,
    )


def intercept_model(y) -> ModelCandidate:
    y = np.asarray(y, dtype=float)
    c0 = float(y.mean())
    ssr = float(np.sum((y - c0) ** 2))
    return ModelCandidate((), (), np.zeros(0), c0, float(np.sqrt(ssr / y.size)),
                          r2_score(y, ssr), 0.0, ec.const(c0), 0, y.size)


def l0_best(y, pool: FeaturePool, subspace: Sequence[int], t: int) -> ModelCandidate:
    """Best ``t``-term least-squares model (plus intercept) within ``subspace``.

    Ties in rmse go to lower assembled complexity, then lexicographic index order.
    """
    scan = l0_scan(y, pool, subspace, t)
    return fit_model(y, pool, scan.combos[scan.best])


# ---------------------------------------------------------------------------
# C2-SISSO
# ---------------------------------------------------------------------------


@dataclass
class SissoResult:
    """Outcome of one complexity-constrained SISSO call."""

    lam: float
    scans: List[L0Scan]
    best: List[ModelCandidate]
    subspaces: List[List[int]]
    n_eligible: int
    pool: FeaturePool = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def n_tested(self) -> int:
        return sum(s.n_tested for s in self.scans)

    @property
    def best_rmse(self) -> float:
        return min(m.rmse for m in self.best)

    def scatter(self) -> Tuple[np.ndarray, np.ndarray]:
        """(rmse, complexity) of every tested solvable model."""
        r = np.concatenate([s.rmse for s in self.scans])
        c = np.concatenate([s.complexity for s in self.scans])
        ok = np.isfinite(r)
        return r[ok], c[ok]

    def front_candidates(self, tol: float = RMSE_TIE_TOL) -> List[ModelCandidate]:
        """Fitted models for the tested set's own non-dominated points.

        Anything dominated within this call is also dominated on any front
        this call is merged into, so only these need to be materialized.
        """
        rows = []
        for s in self.scans:
            ok = np.flatnonzero(np.isfinite(s.rmse))
            rows.extend((float(s.complexity[i]), float(s.rmse[i]), s.t, int(i)) for i in ok)
        rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
        scans = {s.t: s for s in self.scans}
        out, best = [], np.inf
        for c, r, t, i in rows:
            if r < best - tol:
                best = r
                out.append(fit_model(self.y, self.pool, scans[t].combos[i]))
        return out


def c2_sisso(y, pool: FeaturePool, lam: float, k: int = 20, T: int = 3,
             batch_size: int = BATCH_SIZE) -> SissoResult:
    """SIS on the features with complexity <= ``lam``, then l0 fits for t = 1..T.

    The subspace grows by SIS on the residual of the best t-term model,
    excluding features already selected.  Stops early on an exact fit.
    """
    y = np.asarray(y, dtype=float)
    if k < 1 or T < 1:
        raise ValueError("k and T must be positive")
    view = complexity_filter_index(pool, lam)
    z, ok = pool.standardized()
    eligible = view[ok[view]]
    if eligible.size == 0:
        raise SissoError(f"no eligible feature with complexity <= {lam:g}")
    ynorm = float(np.linalg.norm(y))
    n = y.size
    subspace = sis(y, pool, k, candidates=eligible)
    scans: List[L0Scan] = []
    best: List[ModelCandidate] = []
    subspaces: List[List[int]] = []
    residual = y
    for t in range(1, T + 1):
        if t > len(subspace) or t + 1 > n:
            break
        try:
            scan = l0_scan(y, pool, subspace, t, batch_size)
        except SissoError:
            if t == 1:
                raise
            logger.debug("no solvable %d-term model at lambda=%g", t, lam)
            break
        scans.append(scan)
        subspaces.append(sorted(subspace))
        model = fit_model(y, pool, scan.combos[scan.best])
        best.append(model)
        if model.rmse < EXACT_FIT_TOL * ynorm:
            break
        if t == T:
            break
        residual = y - _pool_prediction(pool, model)
        remaining = np.setdiff1d(eligible, subspace, assume_unique=False)
        if remaining.size:
            subspace = subspace + sis(residual, pool, k, candidates=remaining)
    return SissoResult(lam, scans, best, subspaces, int(eligible.size), pool, y)


def _pool_prediction(pool: FeaturePool, model: ModelCandidate) -> np.ndarray:
    out = np.full(pool.n_rows, model.intercept)
    for c, i in zip(model.coefficients, model.features):
        out = out + c * pool.columns[:, i]
    return out
