"""Exception types shared across the package."""


class PclassoError(Exception):
    """Base class for all package errors."""


class DataError(PclassoError, ValueError):
    """Invalid or unusable input data (bad shapes, NaNs, empty groups, ...)."""


class DegenerateGroupError(DataError):
    """A feature group has no positive singular value."""


class NumericalError(PclassoError, RuntimeError):
    """A computation failed numerically (degenerate coordinate, no convergence where required)."""
