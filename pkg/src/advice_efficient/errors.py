"""Exception hierarchy shared by every module."""


class AdviceEfficientError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AdviceEfficientError, ValueError):
    """An argument is outside the domain an operation accepts."""


class InvalidStateError(AdviceEfficientError, RuntimeError):
    """A value that should be impossible given correct sampling was observed."""


class ProtocolViolationError(AdviceEfficientError, RuntimeError):
    """The two-phase learner protocol was not followed."""


class InfeasibleInstanceError(AdviceEfficientError, ValueError):
    """An enumeration oracle was asked for an instance too large to enumerate."""


class InvariantViolationError(AdviceEfficientError, AssertionError):
    """An internal invariant (for example the query budget) was broken."""
