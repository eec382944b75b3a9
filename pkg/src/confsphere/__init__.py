"""Numerical verification toolkit for conformal metrics on the round sphere."""

__version__ = "0.1.0"

from .conformal import CheckReport, ConformalFactor, HypothesisBounds  # noqa: E402,F401
from .errors import (DimensionError, HypothesisNotMetError, InvalidArgumentError,  # noqa: E402,F401
                     MissingBoundError, RangeError, SelectionFailure)
from .fields import ScalarField, parse_field  # noqa: E402,F401
from .scenarios import FactorSequence, ScenarioSpec  # noqa: E402,F401
from .sphere import SphereSampling  # noqa: E402,F401

__all__ = ["CheckReport", "ConformalFactor", "HypothesisBounds", "DimensionError",
           "HypothesisNotMetError", "InvalidArgumentError", "MissingBoundError", "RangeError",
           "SelectionFailure", "ScalarField", "parse_field", "FactorSequence", "ScenarioSpec",
           "SphereSampling", "__version__"]
