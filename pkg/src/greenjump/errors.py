"""Exception types. Each maps to a CLI exit status."""


class GreenjumpError(Exception):
    exit_code = 1


class ConfigError(GreenjumpError, ValueError):
    """Invalid configuration or command-line arguments."""

    exit_code = 2


class DataError(GreenjumpError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 3


class NumericError(GreenjumpError, ArithmeticError):
    """A computation is undefined for the given inputs (degenerate sample, rank deficiency...)."""

    exit_code = 4
