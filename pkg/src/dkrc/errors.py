"""Exception types shared across the toolkit."""


class DkrcError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteError(DkrcError, ValueError):
    """A NaN or infinity was passed in or produced where finite values are required."""


class DimensionError(DkrcError, ValueError):
    """Array shapes do not chain or disagree with the declared dimensions."""


class ConvergenceError(DkrcError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class StabilizabilityError(ConvergenceError):
    """Riccati iteration residual plateaued or diverged; (A, B) looks unstabilizable."""


class SingularMatrixError(DkrcError, ValueError):
    """A matrix that must be invertible is singular to working precision."""


class DegenerateDataError(DkrcError, ValueError):
    """Input data carries no usable information (all-zero lifts, empty trajectory, ...)."""


class DataFormatError(DkrcError, ValueError):
    """A file being parsed violates its schema; the message names the offending line."""
