"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NumericError(ArithmeticError):
    """A factorization or decomposition failed."""


class UnsupportedOperation(TypeError):
    """Operation not defined for the given inducing strategy."""
