"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""


class GfptError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GfptError, ValueError):
    """A data value lies outside the domain an operation accepts."""


class ConfigError(GfptError, ValueError):
    """A model or prior configuration is invalid or inconsistent."""


class UsageError(GfptError, ValueError):
    """An operation was called in a way that violates its contract."""


class NumericalError(GfptError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable values."""
