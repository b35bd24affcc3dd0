"""Exception types shared across the package.

The CLI maps these onto process exit codes, so keep the hierarchy flat and
stable: ConfigError -> 2, IngestionError -> 3, SimulationDivergence -> 4,
TrainingError -> 5.
"""


class TroughflowError(Exception):
    """Base class for all package errors."""


class DomainError(TroughflowError, ValueError):
    """An input is outside the validity range of a correlation or operation."""


class SingularityError(DomainError):
    """An input hits a pole of a correlation (e.g. zero temperature gap)."""


class ConvergenceError(TroughflowError):
    """An iterative solve did not converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class StabilityError(TroughflowError):
    """An explicit integration step violates its stability bound."""


class SimulationDivergence(TroughflowError):
    """A simulated state left the sanity band; carries the failure time."""

    def __init__(self, message, time_s=None):
        super().__init__(message)
        self.time_s = time_s


class IngestionError(TroughflowError):
    """A data file failed to parse or validate."""


class ConfigError(TroughflowError):
    """A scenario or run configuration is invalid."""


class TrainingError(TroughflowError):
    """Network training failed (singular normal equations, bad dataset...)."""


class ComparisonError(TroughflowError):
    """Two runs are not comparable (different scenario inputs)."""
