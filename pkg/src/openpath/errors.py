"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class OpenPathError(Exception):
    exit_code = 1


class UsageError(OpenPathError, ValueError):
    exit_code = 2


class DataError(OpenPathError, ValueError):
    exit_code = 3


class InsufficientDataError(DataError):
    pass


class InvalidCorrelationError(DataError):
    pass


class AccuracyError(OpenPathError, ArithmeticError):
    """Numerical procedure did not reach the requested tolerance."""

    exit_code = 4

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NoBoundStateError(AccuracyError):
    """Width at or beyond the free-particle limit: no confining potential."""


class UnconfinedError(AccuracyError):
    pass


class SamplerTuningWarning(UserWarning):
    pass


class TrotterWarning(UserWarning):
    pass
