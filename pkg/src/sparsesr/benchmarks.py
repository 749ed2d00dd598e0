"""Benchmark problems and reproducible fixture generation."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .expansion import DEFAULT_OPERATORS

TRIG_OPERATORS = DEFAULT_OPERATORS + ("sin", "cos")
SPEED_OF_LIGHT = 2.998e8
GRAVITY = 6.674e-11

# (kind, low, high): "u" uniform, "log" log-uniform
Range = Tuple[str, float, float]
UNIT_BOX: Range = ("u", 1.0, 5.0)


@dataclass(frozen=True)
class Problem:
    """A reference equation over features ``x1 .. xD`` plus sampling details.

    ``truth`` is sympy-parsable text; ``func`` evaluates it on an n x D array.
    """

    id: int
    name: str
    truth: str
    func: Callable[[np.ndarray], np.ndarray]
    n_features: int
    n_train: int
    noise_std: float = 0.0
    names: Optional[Tuple[str, ...]] = None
    ranges: Optional[Tuple[Range, ...]] = None
    operators: Tuple[str, ...] = DEFAULT_OPERATORS

    @property
    def feature_names(self) -> List[str]:
        return list(self.names) if self.names else [f"x{i + 1}" for i in range(self.n_features)]

    def sample_inputs(self, rng: np.random.Generator, n: int) -> np.ndarray:
        ranges = self.ranges or (UNIT_BOX,) * self.n_features
        return np.column_stack([_sample(rng, r, n) for r in ranges])


def _sample(rng: np.random.Generator, r: Range, n: int) -> np.ndarray:
    kind, lo, hi = r
    if kind == "u":
        return rng.uniform(lo, hi, n)
    if kind == "log":
        return np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    if kind == "const":
        return np.full(n, lo)
    raise ValueError(f"unknown range kind {kind!r}")


def _x(X, i):
    return X[:, i - 1]


_C = SPEED_OF_LIGHT
_LOG10 = ("log", 0.1, 10.0)

PROBLEMS: Dict[int, Problem] = {p.id: p for p in [
    Problem(1, "Synthetic_1", "10*x1/(x2*(x3 + x4))",
            lambda X: 10 * _x(X, 1) / (_x(X, 2) * (_x(X, 3) + _x(X, 4))), 5, 10, 0.05),
    Problem(2, "Synthetic_2", "3*sqrt(x1) + 2.1*sin(x2) + 3",
            lambda X: 3 * np.sqrt(_x(X, 1)) + 2.1 * np.sin(_x(X, 2)) + 3, 5, 10, 0.05,
            operators=TRIG_OPERATORS),
    Problem(3, "Synthetic_3", "2.5382*cos(x4) + x1**2 - 0.5",
            lambda X: 2.5382 * np.cos(_x(X, 4)) + _x(X, 1) ** 2 - 0.5, 5, 10, 0.01,
            operators=TRIG_OPERATORS),
    Problem(4, "Synthetic_4", "(x1 + exp(x1))/(x1**2 - x2**2)",
            lambda X: (_x(X, 1) + np.exp(_x(X, 1))) / (_x(X, 1) ** 2 - _x(X, 2) ** 2), 5, 10, 0.01),
    Problem(5, "Synthetic_5", "sqrt(x1**2 + x2**2)",
            lambda X: np.sqrt(_x(X, 1) ** 2 + _x(X, 2) ** 2), 10, 10, 0.05),
    Problem(6, "Synthetic_6", "exp(-x1*x2) + sin(x1*x3)",
            lambda X: np.exp(-_x(X, 1) * _x(X, 2)) + np.sin(_x(X, 1) * _x(X, 3)), 3, 10,
            operators=TRIG_OPERATORS),
    Problem(7, "Synthetic_7", "x1**3 + 3*x1*x2**2 + 5*x1*x3**3",
            lambda X: _x(X, 1) ** 3 + 3 * _x(X, 1) * _x(X, 2) ** 2 + 5 * _x(X, 1) * _x(X, 3) ** 3, 3, 10),
    Problem(8, "Synthetic_8", "x1**3 + x1**2 + x1",
            lambda X: _x(X, 1) ** 3 + _x(X, 1) ** 2 + _x(X, 1), 1, 10),
    Problem(9, "Synthetic_9", "x1**4 - x1**3 + 0.5*x2**2 - x2",
            lambda X: _x(X, 1) ** 4 - _x(X, 1) ** 3 + 0.5 * _x(X, 2) ** 2 - _x(X, 2), 2, 10),
    Problem(10, "Synthetic_10", "sin(x1**2)*cos(x1) - 2",
            lambda X: np.sin(_x(X, 1) ** 2) * np.cos(_x(X, 1)) - 2, 10, 10,
            operators=TRIG_OPERATORS),
    Problem(11, "Hubble's law", "x1*x2", lambda X: _x(X, 1) * _x(X, 2), 2, 10,
            names=("H0", "D")),
    Problem(12, "Newton's law", "x1*x2*x3/x4**2",
            lambda X: _x(X, 1) * _x(X, 2) * _x(X, 3) / _x(X, 4) ** 2, 4, 10,
            names=("G", "m1", "m2", "r")),
    Problem(13, "Leavitt's law", "x1*log(x2)/log(10) + x3",
            lambda X: _x(X, 1) * np.log10(_x(X, 2)) + _x(X, 3), 3, 10,
            names=("alpha", "P", "delta")),
    Problem(14, "Ideal gas law", "x1*x2*x3/x4",
            lambda X: _x(X, 1) * _x(X, 2) * _x(X, 3) / _x(X, 4), 4, 10,
            names=("n", "R", "T", "V")),
    Problem(15, "Rydberg formula", "x1*(1/x2**2 - 1/x3**2)",
            lambda X: _x(X, 1) * (1 / _x(X, 2) ** 2 - 1 / _x(X, 3) ** 2), 3, 10,
            names=("R_H", "n1", "n2")),
    Problem(16, "Distance", "(x2 - x1)**2 + (x3 - x4)**2",
            lambda X: (_x(X, 2) - _x(X, 1)) ** 2 + (_x(X, 3) - _x(X, 4)) ** 2, 4, 50,
            ranges=(_LOG10,) * 4),
    Problem(17, "Relativistic mass", f"x1**2/(1 - x2**2/{_C!r}**2)",
            lambda X: _x(X, 1) ** 2 / (1 - _x(X, 2) ** 2 / _C ** 2), 2, 50,
            names=("m0", "v"), ranges=(("log", 1e-2, 1.0), ("log", 1e5, 1e7))),
    Problem(18, "EM position", "x1*x2/(x3*(x4**2 - x5**2))",
            lambda X: _x(X, 1) * _x(X, 2) / (_x(X, 3) * (_x(X, 4) ** 2 - _x(X, 5) ** 2)), 5, 50,
            names=("q", "E", "m", "omega1", "omega2"), ranges=(_LOG10,) * 5),
    Problem(19, "EM force", "x1*(x2 + x3*x4*sin(x5))",
            lambda X: _x(X, 1) * (_x(X, 2) + _x(X, 3) * _x(X, 4) * np.sin(_x(X, 5))), 5, 50,
            names=("q", "E", "B", "v", "theta"),
            ranges=(_LOG10,) * 4 + (("u", 0.0, 2 * np.pi),), operators=TRIG_OPERATORS),
    Problem(20, "Potential energy", f"{GRAVITY!r}*x1*x2*(1/x4 - 1/x3)",
            lambda X: GRAVITY * _x(X, 1) * _x(X, 2) * (1 / _x(X, 4) - 1 / _x(X, 3)), 4, 50,
            names=("m1", "m2", "r1", "r2"), ranges=(_LOG10,) * 4),
]}


@dataclass
class Fixture:
    """Sampled dataset for one problem; ``y_clean`` is the noiseless target."""

    X: np.ndarray
    y: np.ndarray
    y_clean: np.ndarray
    names: List[str]
    truth: str
    seed: int
    problem_id: object
    noise_std: float = 0.0
    operators: Tuple[str, ...] = DEFAULT_OPERATORS
    extra: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def get_problem(problem_id: int) -> Problem:
    try:
        return PROBLEMS[int(problem_id)]
    except (KeyError, ValueError, TypeError):
        raise KeyError(f"unknown benchmark id {problem_id!r} (valid: 1..{len(PROBLEMS)})") from None


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


def generate(problem_id: int, seed: int = 0, n: Optional[int] = None,
             noise: bool = True, stream: int = 0) -> Fixture:
    """Training data for a benchmark problem.

    Inputs follow the problem's ranges (uniform on [1, 5] by default) and the
    target carries i.i.d. Gaussian noise with the problem's standard
    deviation.  ``stream`` selects an independent draw for the same seed,
    e.g. a held-out test set.
    """
    p = get_problem(problem_id)
    rng = _rng(seed, 1000 * p.id + stream)
    n = p.n_train if n is None else int(n)
    X = p.sample_inputs(rng, n)
    clean = p.func(X)
    y = clean + rng.normal(0.0, p.noise_std, n) if noise and p.noise_std > 0 else clean.copy()
    return Fixture(X, y, clean, p.feature_names, p.truth, seed, p.id,
                   p.noise_std if noise else 0.0, p.operators)


def relativistic_momentum(seed: int = 0, n: int = 50, stream: int = 0) -> Fixture:
    """``p = m v / sqrt(1 - v^2/c^2)``; the speed of light is a constant column."""
    rng = _rng(seed, 9000 + stream)
    m = _sample(rng, ("log", 1e-2, 1.0), n)
    v = _sample(rng, ("log", 1e5, 1e7), n)
    c = np.full(n, SPEED_OF_LIGHT)
    X = np.column_stack([m, v, c])
    y = m * v / np.sqrt(1 - v ** 2 / c ** 2)
    return Fixture(X, y, y.copy(), ["m", "v", "c"], "x1*x2/sqrt(1 - x2**2/x3**2)", seed,
                   "relativistic_momentum", extra={"classical": "x1*x2"})


LORENZ_PARAMS = (10.0, 28.0, 8.0 / 3.0)
LORENZ_X0 = (-8.0, 8.0, 27.0)
LORENZ_TRUTH = ("10*(x2 - x1)", "x1*(28 - x3) - x2", "x1*x2 - 8/3*x3")


def lorenz_rhs(state, params=LORENZ_PARAMS) -> np.ndarray:
    sigma, rho, beta = params
    s = np.asarray(state, dtype=float)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([sigma * (y - x), x * (rho - z) - y, x * y - beta * z], axis=-1)


def lorenz(seed: int = 0, n: int = 5, t_max: float = 100.0, params=LORENZ_PARAMS,
           x0=LORENZ_X0) -> Fixture:
    """States at ``n`` sorted random times and their exact derivatives.

    Derivatives come straight from the vector field at the sampled states,
    so they are consistent with the states regardless of integration error.
    """
    from scipy.integrate import solve_ivp

    rng = _rng(seed, 7000)
    times = np.sort(rng.uniform(0.0, t_max, n))
    sol = solve_ivp(lambda t, s: lorenz_rhs(s, params), (0.0, t_max), x0, method="DOP853",
                    t_eval=times, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"Lorenz integration failed: {sol.message}")
    Z = sol.y.T
    dZ = lorenz_rhs(Z, params)
    return Fixture(Z, dZ, dZ.copy(), ["x", "y", "z"], "; ".join(LORENZ_TRUTH), seed, "lorenz",
                   extra={"times": times, "truth": LORENZ_TRUTH})


def heteroscedastic(y_clean, v: float, rng: np.random.Generator) -> np.ndarray:
    """Noise with standard deviation ``v * |f(x)|`` added to each target."""
    y_clean = np.asarray(y_clean, dtype=float)
    return y_clean + rng.normal(0.0, 1.0, y_clean.shape) * v * np.abs(y_clean)


def nrmse(y_true, y_pred) -> float:
    """RMSE divided by the range of ``y_true``."""
    y_true = np.asarray(y_true, dtype=float)
    span = float(np.ptp(y_true))
    rmse = float(np.sqrt(np.mean((y_true - np.asarray(y_pred, dtype=float)) ** 2)))
    return rmse / span if span > 0 else rmse


def fixture_filename(problem_id, seed: int) -> str:
    key = f"{int(problem_id):02d}" if isinstance(problem_id, (int, np.integer)) else str(problem_id)
    return f"bench_{key}_seed{int(seed)}.csv"


def write_csv(fx: Fixture, directory: str, target: str = "y") -> str:
    """Write ``target`` then the feature columns; returns the file path."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, fixture_filename(fx.problem_id, fx.seed))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([target] + list(fx.names))
        for yi, row in zip(fx.y, fx.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in row])
    return path
