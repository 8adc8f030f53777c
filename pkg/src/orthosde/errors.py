"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(RuntimeError):
    """An exact enumeration would exceed the configured size limit."""


class NumericalError(ArithmeticError):
    """A computation produced a non-finite value."""
