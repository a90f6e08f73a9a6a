"""Exception and warning types shared across the package."""


class GrowVoIError(Exception):
    """Base class for all package errors."""


class ConfigError(GrowVoIError, ValueError):
    """Invalid configuration or argument shapes."""


class DomainError(GrowVoIError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(GrowVoIError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class SingularInnovation(NumericalError):
    """Innovation covariance G S G' + H H' is numerically singular."""


class NoConvergence(NumericalError):
    """An iterative procedure exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class GridEscape(NumericalError):
    """A finite-difference stencil left the value-function grid."""


class GridEscapeWarning(UserWarning):
    """Next states were clamped onto the value-function grid."""
