"""Exception types shared across the package."""


class SpmsimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SpmsimError):
    """Invalid experiment configuration.

    :param message: human-readable description.
    :param key: dotted path of the offending config key, when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class AdmissibilityError(SpmsimError):
    """Noise coefficients rejected before any simulation is attempted."""


class StepError(SpmsimError):
    """Newton iteration for one implicit step failed to converge.

    Carries the iteration trace so callers can decide whether to retry
    with a halved step.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class PathError(SpmsimError):
    """A sample path was aborted after the retry budget was exhausted."""

    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index


class MonteCarloError(SpmsimError):
    """Too many sample paths failed for the ensemble to be trusted."""

    def __init__(self, message, failed_indices):
        super().__init__(message)
        self.failed_indices = list(failed_indices)
