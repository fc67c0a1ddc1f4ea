"""Error types raised by finslerkit."""


class FinslerkitError(Exception):
    """Base class for all numerical failures reported by this package."""


class EvaluationError(FinslerkitError, ValueError):
    """A norm or metric oracle returned a non-finite value."""


class DomainError(FinslerkitError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConvergenceError(FinslerkitError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ImmersionError(FinslerkitError, ValueError):
    """The differential of an immersion is rank deficient."""


class DegeneracyError(FinslerkitError, ArithmeticError):
    """The velocity Hessian of the energy Lagrangian is not positive definite."""
