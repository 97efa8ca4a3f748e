"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands do not share a block structure or have incompatible sizes."""


class ParameterError(ValueError):
    """A numerical parameter is outside its valid range."""


class DomainError(ValueError):
    """A point lies outside the domain of a constrained operator."""


class NumericError(RuntimeError):
    """A linear solve produced non-finite values (singular or ill-conditioned system)."""


class ConvergenceError(RuntimeError):
    """An inner solver exhausted its iteration budget.

    Carries the last residual so callers can decide whether the partial
    result is usable.
    """

    def __init__(self, message, residual=None, iteration=None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration


class StalenessError(RuntimeError):
    """A read referenced an iterate outside the allowed history window."""
