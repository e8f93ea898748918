"""Exception types shared across the toolkit."""

from __future__ import annotations


class PhotonSubError(Exception):
    """Base class for all toolkit errors."""


class DomainError(PhotonSubError, ValueError):
    """A parameter or argument lies outside its mathematical domain."""


class ConfigError(PhotonSubError, ValueError):
    """An experiment configuration violates one of its invariants."""


class DataError(PhotonSubError, ValueError):
    """Input data is missing, malformed, or refers to absent subsets."""


class EstimationError(PhotonSubError, RuntimeError):
    """Base class for statistical-estimation failures."""


class InsufficientDataError(EstimationError):
    """Too few (or degenerate) samples for the requested estimate."""


class MomentIncompatibilityError(EstimationError):
    """Sample moments lie outside the band attainable by the model family."""

    def __init__(self, message: str, variance: float, kurtosis: float):
        super().__init__(message)
        self.variance = variance
        self.kurtosis = kurtosis


class FitConvergenceError(EstimationError):
    """Likelihood maximization did not converge within the iteration cap.

    Carries the best parameters seen so far plus optimizer diagnostics.
    """

    def __init__(self, message: str, best_params, diagnostics: dict):
        super().__init__(message)
        self.best_params = best_params
        self.diagnostics = diagnostics
