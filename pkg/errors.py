"""
Exception hierarchy shared by the library and the CLI.

ConfigError and DomainError map to CLI exit code 1, NumericalError to exit code 2.
"""


class RuinError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RuinError, ValueError):
    """Malformed or invalid experiment configuration."""


class DomainError(RuinError, ValueError):
    """Argument outside the domain of a function."""


class NumericalError(RuinError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy value."""


class FactorizationError(NumericalError):
    """Covariance matrix not factorizable after the last jitter rung."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, value: float, abserr: float):
        super().__init__(f"{message} (value={value!r}, achieved abserr={abserr:.3e})")
        self.value = value
        self.abserr = abserr
