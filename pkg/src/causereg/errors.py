"""Exception types shared across the package."""


class CauseRegError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(CauseRegError, ValueError):
    """Array dimensions do not match what an operation requires."""


class DomainError(CauseRegError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ConfigError(CauseRegError, ValueError):
    """A configuration object is internally inconsistent or unusable."""


class DataError(CauseRegError, ValueError):
    """Malformed input data (files, tables, labels). CLI exit code 2."""


class NumericalError(CauseRegError, ArithmeticError):
    """A computation diverged or produced non-finite values. CLI exit code 3."""


class ConsistencyError(CauseRegError, RuntimeError):
    """A cached intermediate no longer matches the object it came from."""
