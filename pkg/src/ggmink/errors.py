"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class GGMinkError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(GGMinkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ShapeError(DomainError):
    """Arrays or grids that must agree do not."""


class UnboundedBodyError(DomainError):
    """Halfspace normals lie in a closed hemisphere; the intersection is unbounded."""


class OutOfSupportError(DomainError):
    """A support function left the support of the density (q > 0 cutoff)."""


class PreconditionError(GGMinkError):
    """Hypotheses of an existence theorem are not met by the input data."""

    exit_code = 3


class NonConvergenceError(GGMinkError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvexityError(NonConvergenceError):
    """A Newton iterate lost discrete convexity."""


class ContinuationError(NonConvergenceError):
    """A continuation path could not be followed to t = 1."""

    def __init__(self, message, last_t, diagnostics=None):
        super().__init__(message, diagnostics)
        self.last_t = last_t


class InadmissibleParamsError(PreconditionError, DomainError):
    """(p, q) lies outside the range an existence theorem covers."""
