"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, failed validation checks exit 1.
"""


class CorrLidarError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CorrLidarError, ValueError):
    """Invalid configuration, geometry, or input data."""


class NumericalError(CorrLidarError, RuntimeError):
    """A numerical routine could not meet its contract."""


class RankDeficiencyError(NumericalError):
    """Normal equations of a least-squares step are singular."""


class IterationLimitError(NumericalError):
    """Iteration budget exhausted before convergence.

    Carries the last iterate so callers can inspect how far the
    solver got.
    """

    def __init__(self, message, last_params=None, iterations=0):
        super().__init__(message)
        self.last_params = last_params
        self.iterations = iterations


class InitializationError(CorrLidarError, RuntimeError):
    """The frequency initializer found no usable fringe signal."""


class CampaignError(CorrLidarError, RuntimeError):
    """Too large a fraction of campaign trials failed."""
