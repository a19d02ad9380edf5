"""Exception hierarchy.

Two families: ``ConfigurationError`` for inputs that violate a documented
precondition (CLI exit code 2) and ``NumericError`` for failures of the
numerical machinery itself (CLI exit code 3).
"""


class IwatsukaError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ConfigurationError(IwatsukaError, ValueError):
    exit_code = 2


class NumericError(IwatsukaError, ArithmeticError):
    exit_code = 3


class InvalidFieldError(ConfigurationError):
    """A field strength is zero or a profile violates monotonicity/limits."""


class InvalidIntervalError(ConfigurationError):
    """An energy or position interval is empty or reversed."""


class ExtrapolationError(ConfigurationError):
    """A tabulated quantity was queried outside its sample range."""


class RegimeError(ConfigurationError):
    """The field signs do not match the regime an operation requires."""


class NotInGapError(ConfigurationError):
    """An energy interval meets a Landau level of one of the asymptotic fields."""

    def __init__(self, message, level=None, side=None):
        super().__init__(message)
        self.level = level
        self.side = side


class PreconditionError(ConfigurationError):
    pass


class InsufficientBandsError(ConfigurationError):
    """Too few bands were computed to certify a truncated band sum."""


class WindowError(NumericError):
    """No finite truncation window contains the classically allowed region."""


class ConvergenceError(NumericError):
    """Grid doubling did not converge; carries the last two estimates."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class InconclusiveLimitError(NumericError):
    """Neither a plateau nor certified divergence within the probe budget."""


class RangeTooShortError(NumericError):
    """A band table ends while some band is still inside the switch support."""
