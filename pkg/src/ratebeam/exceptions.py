"""Exception types shared across the package."""


class RateBeamError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RateBeamError):
    """Invalid scene or scenario configuration."""


class IllConditionedError(RateBeamError):
    """A linear-algebra step hit a singular or near-singular matrix."""


class AllocationFailedError(RateBeamError):
    """Rate allocation or sensor selection could not produce a feasible result.

    ``status`` carries the underlying solver status when the failure came out
    of the SDP kernel, otherwise a short reason string.
    """

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
