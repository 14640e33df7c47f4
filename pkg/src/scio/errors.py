"""Exception types shared across the package."""


class ScioError(Exception):
    """Base class for numerical failures raised by this package."""


class NotPositiveDefiniteError(ScioError):
    """A matrix required to be positive definite was not."""


class PowerIterationError(ScioError):
    """Eigenvalue iteration did not reach the requested tolerance.

    Carries the last Rayleigh-quotient estimate and the last iterate so a
    caller can inspect how far the iteration got.
    """

    def __init__(self, message, last_estimate=None, last_iterate=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.last_iterate = last_iterate
