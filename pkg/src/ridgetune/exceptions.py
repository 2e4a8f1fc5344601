"""Exception types raised by the fitting and tuning routines."""


class RidgeTuneError(Exception):
    """Base class for all package errors."""


class DimensionError(RidgeTuneError, ValueError):
    """Array shapes do not agree."""


class NonConvergenceError(RidgeTuneError):
    """Iteration budget exhausted before the gradient tolerance was met.

    The last iterate is available as ``result`` so callers can still inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularInformationError(RidgeTuneError):
    """The (free block of the) information matrix is numerically singular."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConstantColumnError(RidgeTuneError, ValueError):
    """A covariate has zero sample variance and cannot be standardized."""


class SelectionError(RidgeTuneError):
    """No finite criterion value was available to select a complexity parameter."""


class SeparationCheckError(RidgeTuneError):
    """The linear program used to detect separation failed."""


class CalibrationCacheError(RidgeTuneError):
    """The simulation calibration cache is missing or inconsistent."""
