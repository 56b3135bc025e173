"""Exception hierarchy shared by the library and the command line."""


class FldmaError(Exception):
    """Base class for all errors raised by :mod:`fldma`."""


class ConfigError(FldmaError, ValueError):
    """Invalid or unknown configuration value."""


class PreconditionError(FldmaError, ValueError):
    """A numerical precondition of an operation is violated.

    Raised, for example, when a propagation delay exceeds the cyclic prefix or
    when a matrix that must have full row rank does not.
    """


class RankDeficientError(PreconditionError):
    """Matrix is (numerically) rank deficient."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(f"{message} (condition number estimate {condition_number:.3e})")
        self.condition_number = condition_number
