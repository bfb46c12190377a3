"""Exception hierarchy shared by all confball modules."""


class ConfballError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ConfballError):
    """Malformed input: bad field spec, unsupported dimension, bad flags."""


class DomainError(ConfballError):
    """A point or field value lies outside the mathematical domain."""


class CapabilityError(ConfballError):
    """The requested derivative order is not available for this field."""


class PreconditionError(ConfballError):
    """An operation's stated precondition is violated (e.g. constraint)."""


class ConvergenceError(ConfballError):
    """An iteration failed to converge within its budget."""

    def __init__(self, message, residual=None, iterations=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.trace = trace


class NumericError(ConfballError):
    """A non-finite value appeared where a finite one is required."""


class RegistryError(ValidationError):
    """Unknown check name requested from the verification registry."""
