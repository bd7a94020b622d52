"""Exception and warning types raised across the toolkit."""


class RomBayesError(Exception):
    """Base class for all toolkit errors."""


class DivergenceError(RomBayesError):
    """A time integration produced a non-finite state."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class StepFailureError(RomBayesError):
    """Newton iteration of an implicit step did not converge."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class RankDeficiencyError(RomBayesError):
    def __init__(self, message, rank):
        super().__init__(message)
        self.rank = rank


class IncompatibleDiscretizationError(RomBayesError):
    pass


class ForecastDivergenceError(RomBayesError):
    """Too many ensemble members diverged during a forecast."""

    def __init__(self, message, n_diverged, n_members):
        super().__init__(message)
        self.n_diverged = n_diverged
        self.n_members = n_members


class IterationFailureError(RomBayesError):
    pass


class ConditioningError(RomBayesError):
    pass


class ConfigError(RomBayesError):
    pass


class StageError(RomBayesError):
    """A pipeline stage failed; carries the artifacts written so far."""

    def __init__(self, stage, cause, artifacts=()):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.artifacts = list(artifacts)


class RomBayesWarning(UserWarning):
    pass


class ConditioningWarning(RomBayesWarning):
    pass
