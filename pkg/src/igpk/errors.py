"""Exception hierarchy shared by all modules."""


class IGPKError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(IGPKError, ValueError):
    """Invalid user input: bad JSON, unknown method, malformed CSV."""


class DimensionError(ConfigError):
    """Locations or matrices with incompatible shapes."""


class DomainError(IGPKError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericError(IGPKError, ArithmeticError):
    """A numerical procedure failed (non-convergence, breakdown)."""


class PSDViolation(NumericError):
    """A quantity that must be nonnegative came out clearly negative."""


class DowndateError(NumericError):
    """A Cholesky downdate would produce an indefinite matrix."""


class DegenerateConfiguration(NumericError):
    """Weights are undefined for the given configuration."""
