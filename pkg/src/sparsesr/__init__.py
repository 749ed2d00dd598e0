"""Sparse symbolic regression with complexity-aware Pareto fronts."""

from .driver import FitConfig, FitError, FitResult, fit, fit_dynamics, fit_multi, lagged_states, lambda_schedule
from .expansion import FeaturePool, OperatorSet, complexity_filter, expand, expand_level, initial_pool, predicted_count
from .exprcore import Expression, evaluate, parse_unit, structural_complexity
from .pareto import ParetoFront, update_pareto, utopia_select
from .screening import ScreenConfig, estimate_mi, prescreen
from .sisso import ModelCandidate, c2_sisso, l0_best, sis

__version__ = "0.1.0"

__all__ = [
    "Expression", "FeaturePool", "FitConfig", "FitError", "FitResult", "ModelCandidate",
    "OperatorSet", "ParetoFront", "ScreenConfig", "c2_sisso", "complexity_filter",
    "estimate_mi", "evaluate", "expand", "expand_level", "fit", "fit_dynamics", "fit_multi",
    "initial_pool", "l0_best", "lagged_states", "lambda_schedule", "parse_unit",
    "predicted_count", "prescreen", "sis", "structural_complexity", "update_pareto",
    "utopia_select",
]
