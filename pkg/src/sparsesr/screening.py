"""Mutual-information pre-screening of primary features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

MAX_MI_ROWS = 2000
_SUBSAMPLE_SEED = 12345


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class ScreenConfig:
    """MI screening settings.

    ``percentile`` switches from the absolute threshold ``gamma`` (nats) to a
    relative cutoff: keep features whose MI lies in the top ``percentile``
    percent.
    """

    gamma: float = 0.1
    n_screen: int = 20
    percentile: Optional[float] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.n_screen < 1:
            raise ValueError("n_screen must be positive")
        if self.percentile is not None and not 0 < self.percentile <= 100:
            raise ValueError("percentile must lie in (0, 100]")

    @property
    def mode(self) -> str:
        return "absolute" if self.percentile is None else "percentile"


@dataclass(frozen=True)
class MIScore:
    index: int
    mi: float


def _standardize(v: np.ndarray) -> Optional[np.ndarray]:
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(v))
    if scale == 0 or not np.isfinite(scale):
        return None
    v = v / scale
    sd = v.std()
    if sd <= 1e-12 * max(1.0, np.abs(v).max()):
        return None
    return (v - v.mean()) / sd


def _gauss_gram(v: np.ndarray, h: float) -> np.ndarray:
    d = (v[:, None] - v[None, :]) / h
    return np.exp(-0.5 * d * d) / (h * np.sqrt(2 * np.pi))


def estimate_mi(x, y, seed: Optional[int] = None) -> float:
    """Resubstitution KDE estimate of MI(x; y) in nats, clamped at zero.

    Both variables are standardized, marginal densities use Gaussian kernels
    with Silverman bandwidths and the joint density the product kernel.
    Degenerate (constant) inputs give 0.  Inputs longer than
    ``MAX_MI_ROWS`` are subsampled with ``seed``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < 4:
        raise ValueError("need at least 4 samples")
    if x.size > MAX_MI_ROWS:
        rng = np.random.default_rng(_SUBSAMPLE_SEED if seed is None else seed)
        rows = rng.choice(x.size, MAX_MI_ROWS, replace=False)
        rows.sort()
        x, y = x[rows], y[rows]
    xs, ys = _standardize(x), _standardize(y)
    if xs is None or ys is None:
        return 0.0
    h = 1.06 * x.size ** (-0.2)  # unit variance after standardizing
    kx = _gauss_gram(xs, h)
    ky = _gauss_gram(ys, h)
    px = kx.mean(axis=1)
    py = ky.mean(axis=1)
    pxy = (kx * ky).mean(axis=1)
    mi = float(np.mean(np.log(pxy) - np.log(px) - np.log(py)))
    return max(mi, 0.0)


def mi_scores(data, y, seed: Optional[int] = None) -> List[MIScore]:
    data = np.asarray(data, dtype=float)
    return [MIScore(i, estimate_mi(data[:, i], y, seed)) for i in range(data.shape[1])]


def rank_scores(values) -> List[int]:
    """Indices sorted by descending value, ties by ascending index."""
    values = np.asarray(values, dtype=float)
    return sorted(range(values.size), key=lambda i: (-values[i], i))


def prescreen(data, y, cfg: ScreenConfig = ScreenConfig(), scores=None,
              seed: Optional[int] = None) -> List[int]:
    """Indices of primary features that pass the MI screen, MI-descending.

    ``scores`` may carry precomputed MI values (one per column).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] < 1:
        raise ValueError("data must be a 2-D matrix with at least one column")
    if scores is None:
        m = np.array([s.mi for s in mi_scores(data, y, seed)])
    else:
        m = np.asarray(scores, dtype=float)
    order = rank_scores(m)
    if cfg.percentile is None:
        cutoff = cfg.gamma
    else:
        cutoff = float(np.percentile(m, 100.0 - cfg.percentile))
    kept = [i for i in order if m[i] >= cutoff][: cfg.n_screen]
    if not kept:
        raise ScreeningError(f"no feature passes MI screen (max MI {m.max():.6g} nats, cutoff {cutoff:.6g})")
    return kept


def correlation_prefilter(data, threshold: float) -> List[int]:
    """Drop the higher-index member of every pair with ``|corr| >= threshold``.

    Constant columns are treated as uncorrelated with everything.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    data = np.asarray(data, dtype=float)
    d = data.shape[1]
    z = []
    for j in range(d):
        s = _standardize(data[:, j])
        z.append(np.zeros(data.shape[0]) if s is None else s)
    z = np.column_stack(z) if d else np.empty((data.shape[0], 0))
    corr = z.T @ z / data.shape[0]
    dropped = set()
    for i in range(d):
        for j in range(i + 1, d):
            if j not in dropped and abs(corr[i, j]) >= threshold - 1e-12:
                dropped.add(j)
    return [i for i in range(d) if i not in dropped]
