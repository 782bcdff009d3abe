"""Exception types raised by the estimators and tools."""


class CelarError(Exception):
    """Base class for all package errors."""


class InputError(CelarError, ValueError):
    """Malformed data, dimensions or configuration."""


class DimensionError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class ConfigError(InputError):
    pass


class NumericalError(CelarError, ArithmeticError):
    """A numerical procedure cannot produce a defined result."""


class SingularDesignError(NumericalError):
    pass


class DegenerateResidualError(NumericalError):
    pass


class OutOfDomainError(NumericalError):
    pass


class NoSolutionError(NumericalError):
    """Zero is not inside the convex hull of the estimating-function rows."""


class UndefinedStatisticError(NumericalError):
    pass


class StudyError(NumericalError):
    pass


class NonStationaryWarning(UserWarning):
    pass
