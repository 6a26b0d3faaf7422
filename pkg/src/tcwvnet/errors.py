"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class TcwvError(Exception):
    exit_code = 1


class ConfigError(TcwvError, ValueError):
    exit_code = 2


class SchemaError(TcwvError, ValueError):
    exit_code = 2


class ShapeError(TcwvError, ValueError):
    """Dimension mismatch between arrays, layers, traces or grids."""

    exit_code = 2


class InsufficientDataError(TcwvError, ValueError):
    exit_code = 4


class NumericalError(TcwvError, ArithmeticError):
    """A quantity is undefined for the given data (zero variance, etc.)."""

    exit_code = 4


class DomainError(TcwvError, ValueError):
    """Request falls outside the coordinate domain of a grid."""

    exit_code = 4
