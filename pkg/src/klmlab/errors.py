"""Exception hierarchy shared by all klmlab modules."""


class KLMLabError(Exception):
    """Base class for every error raised by klmlab."""


class DimensionError(KLMLabError, ValueError):
    """Matrix or subsystem dimensions are inconsistent."""


class DomainError(KLMLabError, ValueError):
    """Input lies outside the mathematical domain of an operation
    (non-Hermitian where Hermitian is required, negative spectrum, ...)."""


class ValidationError(KLMLabError, ValueError):
    """A parameter or configuration value is invalid."""


class NumericalFailureError(KLMLabError, RuntimeError):
    """A numerical result violated its own accuracy contract."""


class NonUniqueSteadyStateError(KLMLabError, RuntimeError):
    """The Liouvillian null space is not one-dimensional."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        super().__init__(f"steady state is not unique: null-space dimension {dimension}")
