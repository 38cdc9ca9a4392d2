"""Exception hierarchy shared by all polaronlab modules."""


class PolaronLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PolaronLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class DivergenceError(DomainError):
    """A requested integral does not converge."""


class ConfigurationError(PolaronLabError, ValueError):
    """Invalid grid, tolerance or run configuration."""


class ConvergenceError(PolaronLabError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    The last residual is kept on the instance so callers can report it.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ResolutionError(PolaronLabError, RuntimeError):
    """The discretisation does not resolve a required feature (tail, boundary, ...)."""


class LemmaViolation(PolaronLabError, AssertionError):
    """A pointwise inequality that must hold analytically failed numerically.

    This almost always signals a discretisation bug rather than a math problem.
    """


class InitializationError(PolaronLabError, RuntimeError):
    """A solver could not be started, e.g. the iterate collapsed to zero."""
