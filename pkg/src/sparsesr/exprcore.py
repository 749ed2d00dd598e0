"""Expression trees, operator table, unit algebra and structural complexity.

Expressions are immutable operator trees over primary features (referenced by
column index) and numeric constants.  Children of symmetric operators are
stored in canonical order, so ``x1 * x2`` and ``x2 * x1`` are the same object
as far as rendering, hashing and complexity are concerned.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

DIV_EPS = 1e-10

VAR = "var"
CONST = "const"
UNARY = "unary"
BINARY = "binary"


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitVector:
    """Rational exponents over an ordered list of base dimensions.

    An empty exponent tuple is the dimensionless unit of unitless mode; it is
    compatible with every other dimensionless vector regardless of length.
    """

    exponents: Tuple[Fraction, ...] = ()

    @property
    def dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def _pad(self, other: "UnitVector") -> Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]:
        n = max(len(self.exponents), len(other.exponents))
        a = self.exponents + (Fraction(0),) * (n - len(self.exponents))
        b = other.exponents + (Fraction(0),) * (n - len(other.exponents))
        return a, b

    def __add__(self, other: "UnitVector") -> "UnitVector":
        a, b = self._pad(other)
        return UnitVector(tuple(x + y for x, y in zip(a, b)))

    def __sub__(self, other: "UnitVector") -> "UnitVector":
        a, b = self._pad(other)
        return UnitVector(tuple(x - y for x, y in zip(a, b)))

    def scale(self, factor) -> "UnitVector":
        f = Fraction(factor)
        return UnitVector(tuple(e * f for e in self.exponents))

    def same_as(self, other: "UnitVector") -> bool:
        a, b = self._pad(other)
        return a == b

    def format(self, dims: Sequence[str]) -> str:
        parts = []
        for name, e in zip(dims, self.exponents):
            if e == 0:
                continue
            parts.append(name if e == 1 else f"{name}^{e}")
        return "*".join(parts) if parts else "1"


DIMENSIONLESS = UnitVector()

_UNIT_TOKEN = re.compile(r"\s*([*/])?\s*([A-Za-z_][A-Za-z_0-9]*|1)\s*(?:\^\s*\(?\s*(-?\d+(?:/\d+)?)\s*\)?)?")


def parse_unit(text: str, dims: Sequence[str]) -> UnitVector:
    """Parse a product-of-powers unit string such as ``"kg*m/s^2"``.

    ``"1"`` or an empty string is dimensionless.  Raises ``ValueError`` for
    symbols outside ``dims`` or malformed input.
    """
    text = text.strip()
    exps = [Fraction(0)] * len(dims)
    if text in ("", "1"):
        return UnitVector(tuple(exps))
    pos = 0
    first = True
    while pos < len(text):
        m = _UNIT_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse unit {text!r} at offset {pos}")
        sep, sym, power = m.groups()
        if first and sep is not None:
            raise ValueError(f"unit {text!r} starts with an operator")
        if not first and sep is None:
            raise ValueError(f"missing '*' or '/' in unit {text!r}")
        p = Fraction(power) if power else Fraction(1)
        if sep == "/":
            p = -p
        if sym != "1":
            if sym not in dims:
                raise ValueError(f"unknown base dimension {sym!r} in unit {text!r}")
            exps[list(dims).index(sym)] += p
        pos = m.end()
        first = False
    return UnitVector(tuple(exps))


def _same(a: UnitVector, b: UnitVector) -> Optional[UnitVector]:
    return a if a.same_as(b) else None


def _needs_dimensionless(a: UnitVector) -> Optional[UnitVector]:
    return DIMENSIONLESS if a.dimensionless else None


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def _positive(x: np.ndarray) -> np.ndarray:
    return x > 0


def _nonzero(x: np.ndarray) -> np.ndarray:
    return np.abs(x) >= DIV_EPS


@dataclass(frozen=True)
class Operator:
    """A unary or binary primitive.

    ``guard`` receives the operand column that must satisfy the domain (the
    denominator for division) and returns a boolean mask of admissible rows.
    ``unit_rule`` maps operand units to the result unit or ``None`` when the
    units are incompatible.
    """

    name: str
    arity: int
    func: Callable[..., np.ndarray]
    unit_rule: Callable[..., Optional[UnitVector]]
    symbol: str = ""
    symmetric: bool = False
    guard: Optional[Callable[[np.ndarray], np.ndarray]] = None
    self_pairing: bool = True

    def render(self, *args: str) -> str:
        if self.arity == 2:
            return f"({args[0]} {self.symbol} {args[1]})"
        if self.name == "sq":
            return f"({args[0]} ^ 2)"
        return f"{self.symbol}({args[0]})"


OPERATORS: Dict[str, Operator] = {}

_ALIASES = {
    "+": "add", "-": "sub", "*": "mul", "/": "div",
    "I": "id", "identity": "id", "^2": "sq", "pow2": "sq", "square": "sq",
    "^-1": "inv", "reciprocal": "inv", "ln": "log",
}


def register_operator(op: Operator) -> Operator:
    """Add ``op`` to the global table (used by OperatorSet name lookup)."""
    if op.arity not in (1, 2):
        raise ValueError("operators must be unary or binary")
    OPERATORS[op.name] = op
    return op


def get_operator(name: str) -> Operator:
    key = _ALIASES.get(name, name)
    try:
        return OPERATORS[key]
    except KeyError:
        raise KeyError(f"unknown operator {name!r}") from None


for _op in (
    Operator("id", 1, lambda a: a, lambda a: a, symbol="id"),
    Operator("add", 2, np.add, _same, "+", symmetric=True),
    Operator("sub", 2, np.subtract, _same, "-", self_pairing=False),
    Operator("mul", 2, np.multiply, lambda a, b: a + b, "*", symmetric=True),
    Operator("div", 2, np.divide, lambda a, b: a - b, "/", guard=_nonzero, self_pairing=False),
    Operator("exp", 1, np.exp, _needs_dimensionless, "exp"),
    Operator("log", 1, np.log, _needs_dimensionless, "log", guard=_positive),
    Operator("sqrt", 1, np.sqrt, lambda a: a.scale(Fraction(1, 2)), "sqrt", guard=_positive),
    Operator("inv", 1, lambda a: 1.0 / a, lambda a: a.scale(-1), "inv", guard=_nonzero),
    Operator("sq", 1, np.square, lambda a: a.scale(2), "^"),
    Operator("sin", 1, np.sin, _needs_dimensionless, "sin"),
    Operator("cos", 1, np.cos, _needs_dimensionless, "cos"),
):
    register_operator(_op)


# ---------------------------------------------------------------------------
# Expression
# ---------------------------------------------------------------------------


def format_constant(value: float) -> str:
    return format(float(value), ".17g")


class Expression:
    """Immutable expression node.

    Build instances with :func:`var`, :func:`const`, :func:`unary` and
    :func:`binary`; equality and hashing go through the canonical string.
    """

    __slots__ = ("kind", "op", "children", "index", "value", "_canon")

    def __init__(self, kind: str, op: Optional[str] = None,
                 children: Tuple["Expression", ...] = (),
                 index: Optional[int] = None, value: Optional[float] = None):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_canon", self._render(None))

    def __setattr__(self, name, value):
        raise AttributeError("Expression is immutable")

    def __reduce__(self):
        return (Expression, (self.kind, self.op, self.children, self.index, self.value))

    def _render(self, names: Optional[Sequence[str]]) -> str:
        if self.kind == VAR:
            return names[self.index] if names is not None else f"x{self.index + 1}"
        if self.kind == CONST:
            return format_constant(self.value)
        if names is None:
            args = [c._canon for c in self.children]
        else:
            args = [c._render(names) for c in self.children]
        return OPERATORS[self.op].render(*args)

    @property
    def canonical(self) -> str:
        return self._canon

    def render(self, names: Optional[Sequence[str]] = None) -> str:
        """Infix text with optional feature names substituted for ``x<i>``."""
        return self._canon if names is None else self._render(names)

    def __str__(self) -> str:
        return self._canon

    def __repr__(self) -> str:
        return f"Expression({self._canon!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and other._canon == self._canon

    def __hash__(self) -> int:
        return hash(self._canon)

    def variables(self) -> set:
        if self.kind == VAR:
            return {self.index}
        out = set()
        for c in self.children:
            out |= c.variables()
        return out

    def to_prefix(self) -> list:
        """Nested-list prefix form, e.g. ``["mul", ["var", 0], ["const", 2.0]]``."""
        if self.kind == VAR:
            return ["var", self.index]
        if self.kind == CONST:
            return ["const", self.value]
        return [self.op] + [c.to_prefix() for c in self.children]

    @classmethod
    def from_prefix(cls, tree) -> "Expression":
        head = tree[0]
        if head == "var":
            return var(int(tree[1]))
        if head == "const":
            return const(float(tree[1]))
        args = [cls.from_prefix(t) for t in tree[1:]]
        if len(args) == 1:
            return unary(head, args[0])
        return binary(head, args[0], args[1])


def var(index: int) -> Expression:
    if index < 0:
        raise ValueError("variable index must be non-negative")
    return Expression(VAR, index=int(index))


def const(value: float) -> Expression:
    return Expression(CONST, value=float(value))


def unary(op: str, child: Expression) -> Expression:
    o = get_operator(op)
    if o.arity != 1:
        raise ValueError(f"{op} is not unary")
    return Expression(UNARY, o.name, (child,))


def binary(op: str, left: Expression, right: Expression) -> Expression:
    o = get_operator(op)
    if o.arity != 2:
        raise ValueError(f"{op} is not binary")
    if o.symmetric and right._canon < left._canon:
        left, right = right, left
    return Expression(BINARY, o.name, (left, right))


def canonical_string(expr: Expression) -> str:
    return expr.canonical


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def apply_operator(op: Operator, *cols: np.ndarray) -> Optional[np.ndarray]:
    """Apply ``op`` element-wise; ``None`` when a guard fires or a value is non-finite."""
    if op.guard is not None and not np.all(op.guard(cols[-1])):
        return None
    with np.errstate(all="ignore"):
        out = op.func(*cols)
    if not np.all(np.isfinite(out)):
        return None
    return out


def evaluate(expr: Expression, data: np.ndarray) -> Optional[np.ndarray]:
    """Evaluate ``expr`` on the rows of ``data`` (n x D).

    Returns ``None`` (the Invalid outcome) when a domain guard fires or any
    element is non-finite.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if expr.kind == VAR:
        if expr.index >= data.shape[1]:
            raise IndexError(f"variable x{expr.index + 1} outside data with {data.shape[1]} columns")
        col = data[:, expr.index].copy()
        return col if np.all(np.isfinite(col)) else None
    if expr.kind == CONST:
        return np.full(data.shape[0], expr.value)
    cols = []
    for child in expr.children:
        c = evaluate(child, data)
        if c is None:
            return None
        cols.append(c)
    return apply_operator(OPERATORS[expr.op], *cols)


# ---------------------------------------------------------------------------
# Complexity
# ---------------------------------------------------------------------------


def symbol_counts(expr: Expression) -> Counter:
    """Uses of each basis symbol; variables keyed ``("var", i)``, operators by name.

    Constants are not basis symbols and do not appear.
    """
    counts: Counter = Counter()
    stack = [expr]
    while stack:
        node = stack.pop()
        if node.kind == VAR:
            counts[(VAR, node.index)] += 1
        elif node.kind != CONST:
            counts[node.op] += 1
            stack.extend(node.children)
    return counts


def bits(total_uses: int, distinct: int) -> float:
    """``K * log2(B)``, zero when fewer than two distinct symbols are present."""
    if distinct <= 1 or total_uses <= 0:
        return 0.0
    return total_uses * math.log2(distinct)


_LOG2 = np.array([0.0] + [math.log2(b) for b in range(1, 4097)])


def bits_array(total_uses, distinct) -> np.ndarray:
    """Vectorized :func:`bits`, bit-identical to the scalar version."""
    K = np.asarray(total_uses, dtype=np.int64)
    B = np.asarray(distinct, dtype=np.int64)
    out = K * _LOG2[np.clip(B, 0, _LOG2.size - 1)]
    return np.where((B <= 1) | (K <= 0), 0.0, out)


def structural_complexity(expr: Expression) -> float:
    counts = symbol_counts(expr)
    return bits(sum(counts.values()), len(counts))


# ---------------------------------------------------------------------------
# Units of expressions
# ---------------------------------------------------------------------------


def unit_of(expr: Expression, units: Optional[Sequence[UnitVector]] = None) -> Optional[UnitVector]:
    """Physical unit of ``expr`` or ``None`` when its units are inconsistent.

    ``units=None`` is unitless mode: everything is dimensionless.
    """
    if units is None:
        return DIMENSIONLESS
    if expr.kind == VAR:
        return units[expr.index]
    if expr.kind == CONST:
        return DIMENSIONLESS
    child_units = []
    for child in expr.children:
        u = unit_of(child, units)
        if u is None:
            return None
        child_units.append(u)
    return OPERATORS[expr.op].unit_rule(*child_units)


def parse_units(mapping: Mapping[str, str], names: Sequence[str],
                dims: Optional[Sequence[str]] = None) -> Tuple[list, list]:
    """Turn ``{column: unit string}`` into per-feature UnitVectors.

    Columns absent from ``mapping`` are dimensionless.  When ``dims`` is not
    given, base dimensions are the sorted set of symbols used in ``mapping``.
    Returns ``(unit_vectors, dims)``.
    """
    if dims is None:
        found = set()
        for text in mapping.values():
            found.update(t for t in re.findall(r"[A-Za-z_][A-Za-z_0-9]*", text))
        dims = sorted(found)
    dims = list(dims)
    out = []
    for name in names:
        out.append(parse_unit(mapping.get(name, "1"), dims))
    return out, dims
