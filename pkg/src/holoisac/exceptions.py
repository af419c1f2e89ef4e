"""Exception hierarchy shared by every module in the package."""


class HoloIsacError(Exception):
    """Base class for all package errors."""


class DomainError(HoloIsacError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModelError(HoloIsacError):
    """The channel model cannot be assembled from the given configuration."""


class ConvergenceError(HoloIsacError, ArithmeticError):
    """A series or iterative solver failed to converge.

    The ``diagnostics`` mapping carries whatever state is useful for
    post-mortem inspection (terms used, last contribution, bracket trace...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NumericError(HoloIsacError, ArithmeticError):
    """A linear-algebra step produced an invalid result (e.g. indefinite matrix)."""


class SolverError(ConvergenceError):
    """Root bracketing or one-dimensional search failed."""


class DegenerateGeometryError(HoloIsacError):
    """The sensing direction carries no energy in the scattering subspace."""
