"""Exception and warning types raised across the package."""


class FabError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FabError):
    pass


class UnsupportedFormat(FabError):
    pass


class IndexOutOfRange(FabError):
    pass


class DimensionMismatch(FabError, ValueError):
    pass


class DomainError(FabError, ValueError):
    """A parameter lies outside the range where the method is defined."""


class AllRowsZero(FabError):
    pass


class ZeroRow(FabError):
    """A projection was requested on an empty row (input was not sanitized)."""


class ZeroResidual(FabError):
    """Row selection on an exactly zero residual; callers treat it as converged."""


class ZeroRhs(FabError):
    pass


class NoCrossover(FabError):
    """The sparse work model never favours the precomputed Gram matrix."""


class InfeasibleDensity(FabError):
    pass


class SingularTriangular(FabError):
    """A rotated Hessenberg diagonal entry collapsed to (numerical) zero."""


class BreakdownWithSingularH(FabError):
    """Arnoldi broke down while the square Hessenberg block is singular.

    ``report`` carries the best iterate found before the breakdown.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CapReached(UserWarning):
    pass


class StagnationWarning(UserWarning):
    pass


class ResidualGapWarning(UserWarning):
    """The recurrence says converged but the directly computed residual disagrees."""
