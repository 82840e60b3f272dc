"""Exception and warning types shared across the package."""


class IULabError(Exception):
    """Base class for all package errors."""


class DomainError(IULabError, ValueError):
    """An argument lies outside the domain of a function."""


class QuadratureError(IULabError, ArithmeticError):
    """Adaptive quadrature did not reach its tolerance within the budget."""


class CapacityError(IULabError, MemoryError):
    """A grid or dense operator exceeds the configured memory budget."""


class ShapeError(IULabError, ValueError):
    """A node vector has the wrong length."""


class ConvergenceError(IULabError, RuntimeError):
    """An iterative eigensolver exhausted its iteration budget.

    ``residuals`` holds the best residuals achieved, lowest eigenvalue first.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class PositivityError(IULabError, RuntimeError):
    """The computed ground state is not strictly positive."""


class ConfigError(IULabError, ValueError):
    """A run configuration failed to parse or validate."""


class GapWarning(UserWarning):
    """The spectral gap above the ground state is numerically zero."""
