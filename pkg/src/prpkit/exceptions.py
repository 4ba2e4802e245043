"""Exception hierarchy used across the package."""


class PRPError(Exception):
    """Base class for all package errors."""


class StreamError(PRPError):
    """The event stream is inconsistent with the warehouse state.

    Raised, for example, when a pod departs a station it is not queued at.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


class InstanceFormatError(PRPError):
    """An instance or solution file is malformed or has the wrong schema version."""


class InfeasibleInstanceError(PRPError):
    """No feasible placement exists for some returning pod."""


class IncompleteSolutionError(PRPError):
    """A solution is missing assignments or violates the no-overlap constraint."""


class NotFittedError(PRPError, AttributeError):
    """An estimator was used before ``fit`` was called."""


class CheckpointError(PRPError):
    """A policy checkpoint is missing, malformed or has an unsupported version."""


class TrainingError(PRPError):
    """Policy optimisation produced non-finite values."""
