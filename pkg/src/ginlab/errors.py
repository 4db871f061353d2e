"""Exception taxonomy shared across the package."""


class GinlabError(Exception):
    """Base class for all package errors."""


class UsageError(GinlabError, ValueError):
    """Caller passed arguments that violate an operation's contract."""


class DomainError(GinlabError, ValueError):
    """Evaluation point sits on (or too near) a pole or outside the domain."""


class CapacityError(GinlabError, ValueError):
    """Request exceeds a configured symbolic limit (generator budget etc.)."""


class NumericError(GinlabError, RuntimeError):
    """A numerical routine failed to reach its required accuracy."""

    def __init__(self, message, partial_value=None):
        super().__init__(message)
        self.partial_value = partial_value


class RegimeError(GinlabError, ValueError):
    """Inputs are outside the validity regime of an asymptotic formula."""


class InputError(GinlabError, ValueError):
    """A user-supplied file or config could not be parsed."""
