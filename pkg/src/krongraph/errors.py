"""Exception types raised across the package."""


class KroneckerError(Exception):
    """Base class for all errors raised by krongraph."""


class SizeError(KroneckerError):
    """A requested object would exceed a size cap or overflow."""


class DomainError(KroneckerError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class BoundsError(KroneckerError, IndexError):
    """A node id is out of range."""


class SaturationError(KroneckerError):
    """The fast generator could not place a fresh edge within its retry budget."""


class ParseError(KroneckerError, ValueError):
    """Malformed edge-list or initiator text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyGraphError(KroneckerError, ValueError):
    """An input file held no edges."""


class UndefinedStatisticError(KroneckerError, ValueError):
    """A statistic is not defined on the given input."""


class ComparisonError(KroneckerError, ValueError):
    """Two statistic reports cannot be compared."""


class FitError(KroneckerError):
    """Fitting failed; ``trace`` holds whatever was recorded before the failure."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
