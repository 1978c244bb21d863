"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class SepdiagError(Exception):
    """Base class for every error raised by this package."""


class InputError(SepdiagError, ValueError):
    """Malformed user input: dimensions, bounds, config values."""


class ExprSyntaxError(InputError):
    """Expression text does not conform to the grammar."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at offset {position}")


class ExprEvalError(SepdiagError, ArithmeticError):
    """An expression could not be evaluated (e.g. zero denominator)."""


class BuildError(SepdiagError):
    """A construction hypothesis failed at build time."""


class GaugeError(BuildError):
    """A gauge sequence violates its ratio or margin requirement."""

    def __init__(self, message: str, n: int, x=None):
        self.n = n
        self.x = x
        super().__init__(message)


class UnresolvablePointError(SepdiagError):
    """The residual branch was reached but the limit value is unavailable."""


class NotApplicable(SepdiagError):
    """A check does not apply at the requested input (e.g. a residual point)."""
