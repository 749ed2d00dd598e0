"""Sympy bridge for comparing fitted models with reference equations."""

from __future__ import annotations

from typing import Dict, Optional, Sequence

import numpy as np
import sympy as sp

from .exprcore import BINARY, CONST, UNARY, VAR, Expression
from .sisso import ModelCandidate


def symbols_for(n: int) -> list:
    """Positive symbols ``x1 .. xn`` (positivity lets sqrt/log expand)."""
    return [sp.Symbol(f"x{i + 1}", positive=True) for i in range(n)]


_UNARY = {
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "inv": lambda a: 1 / a,
    "sq": lambda a: a ** 2,
    "sin": sp.sin,
    "cos": sp.cos,
}
_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def to_sympy(expr: Expression, symbols: Optional[Sequence[sp.Symbol]] = None) -> sp.Expr:
    if symbols is None:
        symbols = symbols_for(max(expr.variables(), default=-1) + 1)
    if expr.kind == VAR:
        return symbols[expr.index]
    if expr.kind == CONST:
        return sp.Float(expr.value, 17)
    args = [to_sympy(c, symbols) for c in expr.children]
    if expr.kind == UNARY:
        if expr.op not in _UNARY:
            raise ValueError(f"no sympy form for operator {expr.op!r}")
        return _UNARY[expr.op](args[0])
    if expr.kind == BINARY and expr.op in _BINARY:
        return _BINARY[expr.op](*args)
    raise ValueError(f"no sympy form for operator {expr.op!r}")


def parse_truth(text: str, n_vars: int) -> sp.Expr:
    """Reference equation over ``x1 .. x{n_vars}`` as a sympy expression."""
    syms = symbols_for(n_vars)
    return sp.sympify(text, locals={str(s): s for s in syms})


def term_coefficients(e: sp.Expr) -> Dict[sp.Expr, float]:
    """Expanded ``{monomial: coefficient}``; the constant term keys on ``1``."""
    out: Dict[sp.Expr, float] = {}
    for term, coef in sp.expand(e).as_coefficients_dict().items():
        c = complex(sp.N(coef))
        if abs(c.imag) > 1e-12 * max(1.0, abs(c.real)):
            raise ValueError("complex coefficient")
        out[term] = out.get(term, 0.0) + c.real
    return out


def _term_scale(term: sp.Expr, syms, data: Optional[np.ndarray]) -> float:
    if data is None or term == 1:
        return 1.0
    f = sp.lambdify(syms, term, "numpy")
    with np.errstate(all="ignore"):
        v = np.asarray(f(*[data[:, i] for i in range(len(syms))]), dtype=float)
    v = np.broadcast_to(v, (data.shape[0],))
    finite = v[np.isfinite(v)]
    return float(np.max(np.abs(finite))) if finite.size else np.inf


def equivalent(candidate: sp.Expr, truth: sp.Expr, n_vars: int, rtol: float = 1e-3,
               data: Optional[np.ndarray] = None, drop_tol: Optional[float] = None) -> bool:
    """Same expanded term set, each coefficient within ``rtol`` relative.

    Terms whose contribution is below ``drop_tol`` (default ``1e-3 * rtol``)
    of the largest one are ignored on both sides; contributions are measured
    on ``data`` when given, else by coefficient magnitude.
    """
    if drop_tol is None:
        drop_tol = 1e-3 * rtol
    syms = symbols_for(n_vars)
    sides = []
    for e in (candidate, truth):
        terms = term_coefficients(e)
        size = {t: abs(c) * _term_scale(t, syms, data) for t, c in terms.items()}
        top = max(size.values(), default=0.0)
        sides.append({t: c for t, c in terms.items() if size[t] > drop_tol * top})
    cand, ref = sides
    if set(cand) != set(ref):
        return False
    return all(abs(cand[t] - ref[t]) <= rtol * abs(ref[t]) for t in ref)


def model_equivalent(model: ModelCandidate, truth: str, n_vars: int, rtol: float = 1e-3,
                     data: Optional[np.ndarray] = None) -> bool:
    syms = symbols_for(n_vars)
    return equivalent(to_sympy(model.expression, syms), parse_truth(truth, n_vars), n_vars,
                      rtol=rtol, data=data)


def support(model: ModelCandidate, n_vars: int, data: Optional[np.ndarray] = None,
            drop_tol: float = 1e-6) -> Dict[sp.Expr, float]:
    """Non-negligible expanded terms of a model with their coefficients."""
    syms = symbols_for(n_vars)
    terms = term_coefficients(to_sympy(model.expression, syms))
    size = {t: abs(c) * _term_scale(t, syms, data) for t, c in terms.items()}
    top = max(size.values(), default=0.0)
    return {t: c for t, c in terms.items() if size[t] > drop_tol * top}
