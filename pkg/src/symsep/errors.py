"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SymsepError(Exception):
    exit_code = 1


class ConfigError(SymsepError, ValueError):
    exit_code = 2


class IOFailure(SymsepError, OSError):
    exit_code = 3


class DimensionError(SymsepError, ValueError):
    exit_code = 4


class ValidationError(SymsepError, ValueError):
    exit_code = 4


class NumericalError(SymsepError, ArithmeticError):
    exit_code = 5
