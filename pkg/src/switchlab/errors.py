"""Exception hierarchy shared by all solvers."""


class SwitchLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(SwitchLabError, ValueError):
    """Input lies outside the region where the operation is defined."""


class ValidationError(SwitchLabError, ValueError):
    """A user-supplied object violates a stated hypothesis."""


class StabilityError(SwitchLabError, ArithmeticError):
    """Overflow or NaN in a recurrence.

    The offending index is kept in ``index``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConsistencyError(SwitchLabError, RuntimeError):
    """Two routes to the same quantity disagree."""


class ConvergenceError(SwitchLabError, RuntimeError):
    """An iteration failed to converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ThresholdNotFound(SwitchLabError, RuntimeError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class NotAnEigenvalue(SwitchLabError, ValueError):
    """The secular matrix is not (numerically) singular at the given energy."""


class BranchPointError(DomainError):
    """Evaluation requested at a channel threshold."""


class UndefinedCountError(SwitchLabError, ValueError):
    """Field is indistinguishable from zero; nodal count is meaningless."""
