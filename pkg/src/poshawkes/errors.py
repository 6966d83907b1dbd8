"""Exception types. ``cli`` maps them onto exit codes."""


class PosHawkesError(Exception):
    """Base class for all package errors."""


class DataError(PosHawkesError, ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FitError(PosHawkesError, ArithmeticError):
    """An optimizer failed to converge."""

    def __init__(self, message, last_iterate=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class BoundError(PosHawkesError, ArithmeticError):
    """A thinning upper bound was smaller than the intensity it must dominate."""


class RunawayCascadeError(PosHawkesError, OverflowError):
    """Simulated cascade is supercritical or exceeded its size cap."""
