"""Exception types raised across the package."""


class SyncError(Exception):
    """Base class for all package errors."""


class ValidationError(SyncError, ValueError):
    """Invalid input, configuration or file contents."""


class DimensionMismatch(ValidationError):
    pass


class CutLocusError(SyncError):
    """Target lies (numerically) at the cut locus of the base point."""


class NoSmallBallError(SyncError):
    """The smallest enclosing ball has radius >= pi/2.

    The ball that was found is still attached as ``ball`` so callers can report it.
    """

    def __init__(self, message, ball=None):
        super().__init__(message)
        self.ball = ball


class EmptyRegionError(SyncError):
    pass


class UnsupportedDimError(SyncError):
    pass


class DepthSearchFailed(SyncError):
    pass


class UnknownLabelsError(SyncError):
    pass


class TooLargeError(SyncError):
    pass


class DisconnectedError(ValidationError):
    pass


class InfeasibleBudgetError(SyncError):
    pass


class NoBreakpointError(SyncError):
    pass
