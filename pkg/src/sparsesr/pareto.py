"""Approximate Pareto front between training rmse and structural complexity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from .sisso import ModelCandidate

RMSE_TOL = 1e-12
LOG_RMSE_FLOOR = 1e-10


@dataclass
class ParetoFront:
    """Non-dominated models sorted by ascending complexity.

    Along ``entries`` the rmse is strictly decreasing (by more than ``tol``).
    ``log_rmse`` selects the utopia scaling (see :func:`utopia_distances`).
    """

    entries: List[ModelCandidate] = field(default_factory=list)
    tol: float = RMSE_TOL
    log_rmse: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def best_rmse(self) -> float:
        return min((m.rmse for m in self.entries), default=np.inf)

    @property
    def utopia(self) -> Optional[ModelCandidate]:
        return utopia_select(self, self.log_rmse) if self.entries else None

    def points(self) -> np.ndarray:
        """``(complexity, rmse)`` rows."""
        return np.array([[m.complexity, m.rmse] for m in self.entries]).reshape(-1, 2)


def non_dominated(candidates: Iterable[ModelCandidate], tol: float = RMSE_TOL) -> List[ModelCandidate]:
    """Deduplicate by structure (keeping the lower rmse) and drop dominated models.

    Merging is order-independent when each key maps to one (complexity,
    rmse) point, which holds for models fitted on the same data.
    """
    by_key = {}
    for m in candidates:
        if not (np.isfinite(m.rmse) and np.isfinite(m.complexity)):
            raise ValueError("candidate rmse and complexity must be finite")
        prev = by_key.get(m.key)
        if prev is None or (m.rmse, m.complexity) < (prev.rmse, prev.complexity):
            by_key[m.key] = m
    ordered = sorted(by_key.values(), key=lambda m: (m.complexity, m.rmse, m.key))
    out, best = [], np.inf
    for m in ordered:
        if m.rmse < best - tol:
            out.append(m)
            best = m.rmse
    return out


def update_pareto(front: ParetoFront, candidates: Iterable[ModelCandidate]) -> ParetoFront:
    """New front from ``front`` merged with ``candidates``; inputs are not modified."""
    merged = non_dominated(list(front.entries) + list(candidates), front.tol)
    return ParetoFront(merged, front.tol, front.log_rmse)


def utopia_distances(front: ParetoFront, log_rmse: bool = False,
                     rmse_floor: float = LOG_RMSE_FLOOR) -> np.ndarray:
    """Distances to (0, 0) after min-max scaling both axes over the front.

    With ``log_rmse`` the rmse axis is taken as ``log10(max(rmse, floor))``
    with ``floor = rmse_floor * max rmse``, and complexity is scaled from
    its absolute zero (``C / max C``).  Gains of orders of magnitude then
    count as such and a near-exact fit is not tied with the cheapest entry.
    """
    pts = front.points()
    lo = pts.min(axis=0)
    if log_rmse:
        r = pts[:, 1]
        floor = max(rmse_floor * r.max(), np.finfo(float).tiny)
        pts = np.column_stack([pts[:, 0], np.log10(np.maximum(r, floor))])
        lo = np.array([0.0, pts[:, 1].min()])
    span = pts.max(axis=0) - lo
    scaled = np.zeros_like(pts)
    for a in range(2):
        if span[a] > 0:
            scaled[:, a] = (pts[:, a] - lo[a]) / span[a]
    return np.hypot(scaled[:, 0], scaled[:, 1])


def utopia_select(front: ParetoFront, log_rmse: bool = False,
                  rmse_floor: float = LOG_RMSE_FLOOR) -> ModelCandidate:
    """Front entry nearest the normalized utopia point; ties go to lower complexity."""
    if not front.entries:
        raise ValueError("empty Pareto front")
    dist = utopia_distances(front, log_rmse, rmse_floor)
    best = dist.min()
    tied = [i for i in range(len(dist)) if dist[i] <= best + 1e-12]
    return min((front.entries[i] for i in tied), key=lambda m: (m.complexity, m.rmse))
