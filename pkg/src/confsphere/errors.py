"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(InvalidArgumentError):
    """The requested variant is not available in this dimension."""


class RangeError(InvalidArgumentError):
    """An exponent or radius lies outside the admissible range."""


class HypothesisNotMetError(RuntimeError):
    """A check refuses to run because its analytic hypothesis fails."""


class SelectionFailure(RuntimeError):
    """No admissible truncation level was found near the target."""


class MissingBoundError(InvalidArgumentError):
    """A hypothesis bound required by the pipeline was not supplied."""
