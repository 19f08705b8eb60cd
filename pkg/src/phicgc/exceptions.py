"""Exception hierarchy shared by the solver modules."""


class PhiCGCError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(PhiCGCError, ValueError):
    pass


class EstimatorUnavailableError(PhiCGCError):
    """Raised when a matrix-free operator cannot report its 1-norm."""


class NumericalRangeError(PhiCGCError, ArithmeticError):
    pass


class NoProgressError(PhiCGCError):
    """The residual exceeds the tolerance even for a vanishing time step."""


class IterationBudgetError(PhiCGCError):
    pass


class GridMismatchError(PhiCGCError, ValueError):
    pass


class UnsupportedBoundaryError(PhiCGCError, ValueError):
    pass


class LevelSolveError(PhiCGCError):
    """A solver failure inside a coarse grid correction, tagged with its level."""

    def __init__(self, level, branch, cause):
        self.level = level
        self.branch = branch
        self.cause = cause
        super().__init__(f"level {level} ({branch}): {type(cause).__name__}: {cause}")


class ConfigError(PhiCGCError, ValueError):
    pass
