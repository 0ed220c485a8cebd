"""Exception hierarchy shared by all modules."""


class TruncGaussError(Exception):
    """Base class for package errors."""


class ValidationError(TruncGaussError, ValueError):
    """Bad configuration or argument values (CLI exit code 2)."""


class InvalidInputError(ValidationError):
    """Non-finite or malformed numeric input."""


class DimensionMismatchError(ValidationError):
    pass


class SizeError(ValidationError):
    """A requested enumeration or construction is too large."""


class InsufficientDataError(ValidationError):
    pass


class NumericalError(TruncGaussError, ArithmeticError):
    """Numerical failure during a computation (CLI exit code 3)."""


class FactorizationError(NumericalError):
    pass


class NumericalOverflowError(NumericalError):
    pass


class LowMassError(NumericalError):
    """Rejection sampling gave up: the truncation set has too little mass.

    ``acceptance`` carries the running acceptance-rate estimate at the point
    of failure.
    """

    def __init__(self, message, acceptance):
        super().__init__(message)
        self.acceptance = acceptance
