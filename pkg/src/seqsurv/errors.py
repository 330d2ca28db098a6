"""Exception types shared across the package."""


class SeqSurvError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SeqSurvError):
    """Input data violates a structural invariant (bad arm code, ragged covariates, ...)."""


class DegenerateDataError(SeqSurvError):
    """The data cannot support the requested estimate (e.g. empty risk set at an event)."""


class ConvergenceError(SeqSurvError):
    """Newton iteration did not reach the score tolerance.

    Carries the last iterate and its score norm for post-mortem inspection.
    """

    def __init__(self, message, beta=None, score_norm=None):
        super().__init__(message)
        self.beta = beta
        self.score_norm = score_norm


class SeparationError(SeqSurvError):
    """Monotone partial likelihood detected (coefficient norm diverged)."""

    def __init__(self, message, beta=None):
        super().__init__(message)
        self.beta = beta
