"""Recursive construction of the candidate feature library.

A :class:`FeaturePool` keeps every feature's column in one ``n x d`` matrix,
together with per-feature symbol counts and symbol-presence bitmasks, so that
the complexity of every prospective ``op(f_i, f_j)`` can be computed without
building expression objects.  Only candidates that survive validity, unit and
duplicate checks are materialized.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import exprcore as ec
from .exprcore import DIMENSIONLESS, Expression, Operator, UnitVector

logger = logging.getLogger(__name__)

DEFAULT_OPERATORS = ("id", "add", "sub", "mul", "div", "exp", "log", "sqrt", "inv", "sq")
MAX_POOL_SIZE = 200_000
COUNT_CAP = 2**63 - 1
_UNIT_SCALE_BITS = 16
_CHUNK = 1 << 21
_KEY_DECIMALS = 9


class ExpansionError(RuntimeError):
    pass


@dataclass(frozen=True)
class OperatorSet:
    unary: Tuple[Operator, ...]
    binary: Tuple[Operator, ...]
    identity: bool = True

    def __post_init__(self):
        names = [o.name for o in self.unary + self.binary]
        if len(set(names)) != len(names):
            raise ValueError("operator identifiers must be unique")

    @classmethod
    def from_names(cls, names: Iterable[str], self_pairing: Optional[bool] = None) -> "OperatorSet":
        """Build from identifiers or aliases (``"+"``, ``"log"``, ``"sq"`` ...).

        ``self_pairing`` overrides every binary operator's own flag.
        """
        unary, binary, identity = [], [], False
        for name in names:
            op = ec.get_operator(name)
            if op.name == "id":
                identity = True
            elif op.arity == 1:
                unary.append(op)
            else:
                if self_pairing is not None:
                    op = _with_self_pairing(op, self_pairing)
                binary.append(op)
        return cls(tuple(unary), tuple(binary), identity)

    @classmethod
    def default(cls, self_pairing: Optional[bool] = None) -> "OperatorSet":
        return cls.from_names(DEFAULT_OPERATORS, self_pairing=self_pairing)

    @property
    def names(self) -> List[str]:
        head = ["id"] if self.identity else []
        return head + [o.name for o in self.binary + self.unary]


def _with_self_pairing(op: Operator, flag: bool) -> Operator:
    from dataclasses import replace
    return replace(op, self_pairing=flag)


@dataclass(frozen=True)
class Feature:
    expr: Expression
    complexity: float
    unit: UnitVector = DIMENSIONLESS
    level: int = 0
    is_intercept: bool = False

    @property
    def canonical(self) -> str:
        return self.expr.canonical


@dataclass
class FeaturePool:
    """Features of one expansion level plus the arrays the search works on.

    Index 0 of a pool built by :func:`initial_pool` is the intercept.
    ``symbols`` is the alphabet behind ``counts`` and ``masks`` columns:
    ``("var", i)`` entries followed by operator names.
    """

    level: int
    features: List[Feature]
    columns: np.ndarray
    counts: np.ndarray
    masks: np.ndarray
    symbols: List
    primary: List[int]
    unit_exps: Optional[np.ndarray] = None
    unit_scale: int = 1
    keys: Dict[bytes, int] = field(default_factory=dict)
    _std: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def n_rows(self) -> int:
        return self.columns.shape[0]

    @property
    def complexities(self) -> np.ndarray:
        return np.array([f.complexity for f in self.features])

    @property
    def intercept_mask(self) -> np.ndarray:
        return np.array([f.is_intercept for f in self.features], dtype=bool)

    @property
    def canonical_strings(self) -> List[str]:
        return [f.canonical for f in self.features]

    def symbol_index(self, key) -> int:
        return self.symbols.index(key)

    def standardized(self) -> Tuple[np.ndarray, np.ndarray]:
        """Zero-mean unit-variance copy of ``columns`` and the eligibility mask.

        Intercept and constant columns are ineligible and come back as zeros.
        """
        if self._std is None:
            z, ok = standardize_columns(self.columns)
            ok &= ~self.intercept_mask
            z[:, ~ok] = 0.0
            self._std = (z, ok)
        return self._std

    def subset(self, index: Sequence[int]) -> "FeaturePool":
        index = np.asarray(index, dtype=int)
        sub = FeaturePool(
            level=self.level,
            features=[self.features[i] for i in index],
            columns=self.columns[:, index],
            counts=self.counts[index],
            masks=self.masks[index],
            symbols=self.symbols,
            primary=self.primary,
            unit_exps=None if self.unit_exps is None else self.unit_exps[index],
            unit_scale=self.unit_scale,
        )
        if self._std is not None:
            sub._std = (self._std[0][:, index], self._std[1][index])
        return sub


# ---------------------------------------------------------------------------
# Numeric helpers
# ---------------------------------------------------------------------------


def standardize_columns(cols: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Column-wise standardization robust to huge magnitudes.

    Returns ``(z, ok)`` where ``ok`` flags columns with non-zero variance.
    """
    cols = np.asarray(cols, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    scale = np.max(np.abs(cols), axis=0)
    scale[scale == 0] = 1.0
    c = cols / scale
    c = c - c.mean(axis=0)
    sd = np.sqrt(np.mean(c * c, axis=0))
    ok = sd > 1e-10
    sd[~ok] = 1.0
    return c / sd, ok


def column_keys(cols: np.ndarray) -> List[bytes]:
    """Hash keys equal for columns related by a non-zero affine map.

    Constant columns share the key ``b"const"`` (they duplicate the intercept).
    """
    z, ok = standardize_columns(cols)
    if z.shape[0] == 0:
        return [b"const"] * z.shape[1]
    big = np.abs(z) > 1e-6
    first = np.argmax(big, axis=0)
    sign = np.sign(z[first, np.arange(z.shape[1])])
    sign[sign == 0] = 1.0
    z = np.round(z * sign, _KEY_DECIMALS) + 0.0
    zt = np.ascontiguousarray(z.T)
    return [zt[i].tobytes() if ok[i] else b"const" for i in range(zt.shape[0])]


def _bit_words(n_symbols: int) -> int:
    return max(1, (n_symbols + 63) // 64)


def _popcount(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(masks).sum(axis=-1).astype(np.int64)


_bits = ec.bits_array


# ---------------------------------------------------------------------------
# Level 0
# ---------------------------------------------------------------------------


def build_alphabet(primary: Sequence[int], ops: OperatorSet) -> List:
    symbols = [(ec.VAR, int(i)) for i in primary]
    for name in [o.name for o in ops.binary + ops.unary] + ["add", "mul"]:
        if name not in symbols:
            symbols.append(name)
    return symbols


def _unit_scale(units: Sequence[UnitVector]) -> int:
    den = 1
    for u in units:
        for e in u.exponents:
            den = math.lcm(den, Fraction(e).denominator)
    return den << _UNIT_SCALE_BITS


def initial_pool(data, primary: Sequence[int], ops: Optional[OperatorSet] = None,
                 units: Optional[Sequence[UnitVector]] = None, dedup: bool = True) -> FeaturePool:
    """Level-0 pool: intercept followed by the screened primary features.

    ``units`` (one entry per column of ``data``) enables dimensional checks.
    Primary columns that duplicate an earlier one (up to an affine map) or
    are constant are dropped when ``dedup`` is set.
    """
    ops = ops or OperatorSet.default()
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be 2-D")
    primary = [int(i) for i in primary]
    if not primary:
        raise ExpansionError("no primary features to expand")
    symbols = build_alphabet(primary, ops)
    A = len(symbols)
    W = _bit_words(A)
    n = data.shape[0]

    feats = [Feature(ec.const(1.0), 0.0, DIMENSIONLESS, 0, True)]
    cols = [np.ones(n)]
    count_rows = [np.zeros(A, dtype=np.int32)]
    mask_rows = [np.zeros(W, dtype=np.uint64)]
    unit_rows = []
    scale = 1
    if units is not None:
        scale = _unit_scale(units)
        ndim = max((len(u.exponents) for u in units), default=0)
        unit_rows.append(np.zeros(ndim, dtype=np.int64))
    keys: Dict[bytes, int] = {b"const": 0}
    for pos, i in enumerate(primary):
        col = data[:, i]
        if not np.all(np.isfinite(col)):
            continue
        if dedup:
            key = column_keys(col[:, None])[0]
            if key in keys:
                continue
            keys[key] = len(feats)
        u = DIMENSIONLESS if units is None else units[i]
        feats.append(Feature(ec.var(i), 0.0, u, 0))
        cols.append(col.copy())
        c = np.zeros(A, dtype=np.int32)
        c[pos] = 1
        count_rows.append(c)
        m = np.zeros(W, dtype=np.uint64)
        m[pos // 64] = np.uint64(1) << np.uint64(pos % 64)
        mask_rows.append(m)
        if units is not None:
            ex = np.zeros(len(unit_rows[0]), dtype=np.int64)
            for k, e in enumerate(u.exponents):
                ex[k] = int(Fraction(e) * scale)
            unit_rows.append(ex)
    if len(feats) == 1:
        raise ExpansionError("no valid primary feature")
    return FeaturePool(
        level=0,
        features=feats,
        columns=np.column_stack(cols),
        counts=np.vstack(count_rows),
        masks=np.vstack(mask_rows),
        symbols=symbols,
        primary=primary,
        unit_exps=None if units is None else np.vstack(unit_rows),
        unit_scale=scale,
        keys=keys if dedup else {},
    )


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------


def _pair_count(d: int, op: Operator) -> int:
    if op.symmetric:
        return d * (d + 1) // 2 if op.self_pairing else d * (d - 1) // 2
    return d * d if op.self_pairing else d * (d - 1)


def predicted_count(d_prev: int, ops: OperatorSet, cap: int = COUNT_CAP) -> int:
    """Number of candidates one expansion step generates before filtering.

    ``d_prev`` counts operand features (the intercept is never an operand).
    Identity is carry-forward and adds nothing.  Symmetric operators
    contribute unordered pairs, non-symmetric ones ordered pairs; self pairs
    are included for operators whose ``self_pairing`` flag is set.  Counts
    beyond ``cap`` saturate with a ``RuntimeWarning``.
    """
    if d_prev < 1:
        raise ValueError("d_prev must be positive")
    total = len(ops.unary) * d_prev + sum(_pair_count(d_prev, op) for op in ops.binary)
    if total > cap:
        warnings.warn(f"predicted feature count {total} saturated at {cap}", RuntimeWarning)
        return cap
    return total


# ---------------------------------------------------------------------------
# Candidate scan
# ---------------------------------------------------------------------------


@dataclass
class _Candidates:
    c: np.ndarray
    op: np.ndarray
    i: np.ndarray
    j: np.ndarray

    @classmethod
    def empty(cls) -> "_Candidates":
        z = np.empty(0, dtype=np.int64)
        return cls(np.empty(0), z, z, z)

    @classmethod
    def concat(cls, parts: List["_Candidates"]) -> "_Candidates":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, a) for p in parts]) for a in ("c", "op", "i", "j")))

    def take(self, sel) -> "_Candidates":
        return _Candidates(self.c[sel], self.op[sel], self.i[sel], self.j[sel])

    def __len__(self) -> int:
        return self.c.size


def _pairs(ia: np.ndarray, ib: np.ndarray, same: bool, op: Operator):
    """Yield ``(i, j)`` index chunks of the pair block ``ia x ib``."""
    na, nb = ia.size, ib.size
    if same:
        rows = max(1, _CHUNK // max(na, 1))
        for s in range(0, na, rows):
            e = min(s + rows, na)
            r = np.repeat(np.arange(s, e), na)
            c = np.tile(np.arange(na), e - s)
            if op.symmetric:
                keep = c >= r if op.self_pairing else c > r
            else:
                keep = None if op.self_pairing else r != c
            if keep is not None:
                r, c = r[keep], c[keep]
            yield ia[r], ia[c]
        return
    rows = max(1, _CHUNK // max(nb, 1))
    for s in range(0, na, rows):
        e = min(s + rows, na)
        yield np.repeat(ia[s:e], nb), np.tile(ib, e - s)


def _scan(pool: FeaturePool, ops: Sequence[Operator], operands: np.ndarray,
          target: int, op_bits: List[np.ndarray]) -> Tuple[_Candidates, float]:
    """Exact complexities of candidates, keeping at least the ``target`` cheapest.

    Returns the kept candidates and the cut ``tau``: every candidate with
    complexity <= tau is kept (``inf`` when nothing was cut).
    """
    K = pool.counts[operands].sum(axis=1).astype(np.int64)
    B = _popcount(pool.masks[operands])
    groups: Dict[Tuple[int, int], np.ndarray] = {}
    for key in sorted(set(zip(K.tolist(), B.tolist()))):
        groups[key] = operands[(K == key[0]) & (B == key[1])]
    gkeys = list(groups)

    blocks = []
    for oi, op in enumerate(ops):
        if op.arity == 1:
            for g in gkeys:
                lb = _bits(g[0] + 1, max(g[1], 2))
                blocks.append((float(lb), oi, g, None))
        else:
            for a, ga in enumerate(gkeys):
                others = gkeys[a:] if op.symmetric else gkeys
                for gb in others:
                    lb = _bits(ga[0] + gb[0] + 1, max(ga[1], gb[1], 2))
                    blocks.append((float(lb), oi, ga, gb))
    blocks.sort(key=lambda b: (b[0], b[1], b[2], b[3] or (0, 0)))

    tau = math.inf
    kept: List[_Candidates] = []
    n_kept = 0
    limit = 2 * target
    masks = pool.masks
    for lb, oi, ga, gb in blocks:
        if lb > tau:
            break
        op = ops[oi]
        bit = op_bits[oi]
        ia = groups[ga]
        if gb is None:
            Bn = _popcount(masks[ia] | bit)
            C = _bits(ga[0] + 1, Bn)
            sel = C <= tau
            part = _Candidates(C[sel], np.full(int(sel.sum()), oi), ia[sel], np.full(int(sel.sum()), -1))
            kept.append(part)
            n_kept += len(part)
        else:
            ib = groups[gb]
            Kn = ga[0] + gb[0] + 1
            for pi, pj in _pairs(ia, ib, ga == gb, op):
                Bn = _popcount(masks[pi] | masks[pj] | bit)
                C = _bits(Kn, Bn)
                sel = C <= tau
                if not sel.all():
                    pi, pj, C = pi[sel], pj[sel], C[sel]
                kept.append(_Candidates(C, np.full(C.size, oi), pi, pj))
                n_kept += C.size
                if n_kept > limit:
                    kept, tau, n_kept = _prune(kept, target)
                    limit = 2 * max(target, n_kept)
        if n_kept > limit:
            kept, tau, n_kept = _prune(kept, target)
            limit = 2 * max(target, n_kept)
    if n_kept > target:
        kept, tau2, n_kept = _prune(kept, target)
        tau = min(tau, tau2)
    return _Candidates.concat(kept), tau


def _prune(kept: List[_Candidates], target: int):
    allc = _Candidates.concat(kept)
    if len(allc) <= target:
        return [allc], math.inf, len(allc)
    tau = float(np.partition(allc.c, target - 1)[target - 1])
    allc = allc.take(allc.c <= tau)
    return [allc], tau, len(allc)


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------


def _unit_exps(pool: FeaturePool, op: Operator, i: np.ndarray, j: np.ndarray):
    """Vectorized unit rule on scaled integer exponents.

    Returns ``(ok, exps)``; custom operators fall back to their Fraction rule.
    """
    U = pool.unit_exps
    a = U[i]
    name = op.name
    if op.arity == 2:
        b = U[j]
        if name in ("add", "sub"):
            return np.all(a == b, axis=1), a
        if name == "mul":
            return np.ones(i.size, dtype=bool), a + b
        if name == "div":
            return np.ones(i.size, dtype=bool), a - b
    else:
        if name in ("exp", "log", "sin", "cos"):
            return np.all(a == 0, axis=1), a
        if name == "sqrt":
            return np.all(a % 2 == 0, axis=1), a // 2
        if name == "sq":
            return np.ones(i.size, dtype=bool), 2 * a
        if name == "inv":
            return np.ones(i.size, dtype=bool), -a
    ok = np.zeros(i.size, dtype=bool)
    out = np.zeros_like(a)
    for k in range(i.size):
        args = [pool.features[i[k]].unit] + ([pool.features[j[k]].unit] if op.arity == 2 else [])
        u = op.unit_rule(*args)
        if u is not None and all((Fraction(e) * pool.unit_scale).denominator == 1 for e in u.exponents):
            ok[k] = True
            for d, e in enumerate(u.exponents[: out.shape[1]]):
                out[k, d] = int(Fraction(e) * pool.unit_scale)
    return ok, out


def _evaluate_candidates(pool: FeaturePool, op: Operator, i: np.ndarray, j: np.ndarray):
    a = pool.columns[:, i]
    if op.arity == 2:
        b = pool.columns[:, j]
        ok = np.ones(i.size, dtype=bool)
        if op.guard is not None:
            ok &= np.all(op.guard(b), axis=0)
        with np.errstate(all="ignore"):
            out = op.func(a, b)
    else:
        ok = np.ones(i.size, dtype=bool)
        if op.guard is not None:
            ok &= np.all(op.guard(a), axis=0)
        with np.errstate(all="ignore"):
            out = op.func(a)
    ok &= np.all(np.isfinite(out), axis=0)
    return ok, out


def expand_level(pool: FeaturePool, ops: Optional[OperatorSet] = None,
                 max_pool_size: int = MAX_POOL_SIZE, dedup: bool = True) -> FeaturePool:
    """Apply every operator to the operand features of ``pool``.

    All previous features are carried forward.  New features are added in
    ascending structural complexity (ties by canonical string) until the
    pool holds ``max_pool_size`` features.  Candidates are rejected on
    incompatible units, failed domain guards, non-finite values, and, when
    ``dedup`` is set, on a repeated canonical string or a column that is an
    affine image of an existing one (such columns are interchangeable in a
    regression with intercept).
    """
    ops = ops or OperatorSet.default()
    operands = np.array([k for k, f in enumerate(pool.features) if not f.is_intercept], dtype=np.int64)
    if operands.size == 0:
        raise ExpansionError("expansion produced no valid features")
    op_list: List[Operator] = list(ops.unary) + list(ops.binary)
    for o in op_list:
        if o.name not in pool.symbols:
            raise ValueError(f"operator {o.name!r} is not in the pool alphabet")
    W = pool.masks.shape[1]
    op_bits, op_pos = [], []
    for o in op_list:
        p = pool.symbol_index(o.name)
        m = np.zeros(W, dtype=np.uint64)
        m[p // 64] = np.uint64(1) << np.uint64(p % 64)
        op_bits.append(m)
        op_pos.append(p)

    d = len(pool)
    budget = max_pool_size - d
    expected = predicted_count(operands.size, ops)
    if expected > budget:
        logger.info("level %d: %d candidates for a budget of %d features", pool.level + 1, expected, budget)

    new_cols: List[np.ndarray] = []
    new_feats: List[Feature] = []
    new_counts: List[np.ndarray] = []
    new_masks: List[np.ndarray] = []
    new_units: List[np.ndarray] = []
    if budget > 0 and op_list:
        factor = 3
        while True:
            target = min(expected, factor * budget)
            cands, tau = _scan(pool, op_list, operands, target, op_bits)
            accepted = _materialize(pool, op_list, op_pos, op_bits, cands, budget, dedup)
            full = len(accepted[0]) >= budget
            if full or math.isinf(tau):
                break
            factor *= 4
        new_feats, new_cols, new_counts, new_masks, new_units, new_keys = accepted
    else:
        new_keys = {}

    if new_feats:
        columns = np.hstack([pool.columns, np.column_stack(new_cols)])
        counts = np.vstack([pool.counts, np.vstack(new_counts)])
        masks = np.vstack([pool.masks, np.vstack(new_masks)])
        unit_exps = None if pool.unit_exps is None else np.vstack([pool.unit_exps, np.vstack(new_units)])
    else:
        columns, counts, masks, unit_exps = pool.columns, pool.counts, pool.masks, pool.unit_exps
    keys = dict(pool.keys)
    for k, v in new_keys.items():
        keys[k] = d + v
    return FeaturePool(
        level=pool.level + 1,
        features=list(pool.features) + new_feats,
        columns=columns,
        counts=counts,
        masks=masks,
        symbols=pool.symbols,
        primary=pool.primary,
        unit_exps=unit_exps,
        unit_scale=pool.unit_scale,
        keys=keys,
    )


def _materialize(pool, op_list, op_pos, op_bits, cands: _Candidates, budget: int, dedup: bool):
    level = pool.level + 1
    seen_str = set(pool.canonical_strings) if dedup else set()
    seen_keys = dict(pool.keys) if dedup else {}
    feats, cols, counts, masks, units = [], [], [], [], []
    new_keys: Dict[bytes, int] = {}
    if len(cands) == 0:
        return feats, cols, counts, masks, units, new_keys
    tiers = np.round(cands.c, 9)
    order = np.lexsort((cands.j, cands.i, cands.op, tiers))
    cands = cands.take(order)
    tiers = tiers[order]
    bounds = np.flatnonzero(np.diff(tiers)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(cands)]])
    for s, e in zip(starts, ends):
        tier = cands.take(slice(s, e))
        rows = []
        for oi in np.unique(tier.op):
            sel = np.flatnonzero(tier.op == oi)
            for cs in range(0, sel.size, 65536):
                part = sel[cs:cs + 65536]
                op = op_list[oi]
                ti, tj = tier.i[part], tier.j[part]
                ok, out = _evaluate_candidates(pool, op, ti, tj)
                uexp = None
                if pool.unit_exps is not None:
                    uok, uexp = _unit_exps(pool, op, ti, tj)
                    ok &= uok
                good = np.flatnonzero(ok)
                if good.size == 0:
                    continue
                gcols = out[:, good]
                gkeys = column_keys(gcols) if dedup else [None] * good.size
                for g, key in zip(good, gkeys):
                    fi, fj = int(ti[g]), int(tj[g])
                    a = pool.features[fi].expr
                    if op.arity == 1:
                        expr = Expression(ec.UNARY, op.name, (a,))
                    else:
                        b = pool.features[fj].expr
                        if op.symmetric and b.canonical < a.canonical:
                            a, b = b, a
                        expr = Expression(ec.BINARY, op.name, (a, b))
                    rows.append((expr.canonical, expr, op, fi, fj, out[:, g],
                                 None if uexp is None else uexp[g], key))
        rows.sort(key=lambda r: r[0])
        for canon, expr, op, fi, fj, col, uex, key in rows:
            if dedup:
                if canon in seen_str or key in seen_keys:
                    continue
                seen_str.add(canon)
                seen_keys[key] = len(feats)
                new_keys[key] = len(feats)
            oi = op_list.index(op)
            cnt = pool.counts[fi].copy()
            msk = pool.masks[fi].copy()
            if op.arity == 2:
                cnt = cnt + pool.counts[fj]
                msk = msk | pool.masks[fj]
            cnt[op_pos[oi]] += 1
            msk = msk | op_bits[oi]
            if uex is None:
                unit = DIMENSIONLESS
            else:
                unit = UnitVector(tuple(Fraction(int(v), pool.unit_scale) for v in uex))
            cval = ec.bits(int(cnt.sum()), int(np.bitwise_count(msk).sum()))
            feats.append(Feature(expr, cval, unit, level))
            cols.append(col)
            counts.append(cnt)
            masks.append(msk)
            if uex is not None:
                units.append(uex)
            if len(feats) >= budget:
                return feats, cols, counts, masks, units, new_keys
    return feats, cols, counts, masks, units, new_keys


def expand(pool: FeaturePool, levels: int, ops: Optional[OperatorSet] = None,
           max_pool_size: int = MAX_POOL_SIZE, dedup: bool = True) -> List[FeaturePool]:
    """Pools for levels ``pool.level + 1 .. pool.level + levels``."""
    out = []
    for _ in range(levels):
        pool = expand_level(pool, ops, max_pool_size=max_pool_size, dedup=dedup)
        out.append(pool)
    return out


def complexity_filter(pool: FeaturePool, lam: float) -> FeaturePool:
    """Features with complexity <= ``lam``; the intercept is always kept."""
    if lam < 0:
        raise ValueError("complexity bound must be non-negative")
    return pool.subset(complexity_filter_index(pool, lam))


def complexity_filter_index(pool: FeaturePool, lam: float) -> np.ndarray:
    c = pool.complexities
    keep = (c <= lam + 1e-9) | pool.intercept_mask
    return np.flatnonzero(keep)
