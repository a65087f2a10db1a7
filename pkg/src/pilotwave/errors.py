"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures (instability, NaN, degenerate fields) with 3.
"""


class PilotWaveError(Exception):
    """Base class for all package errors."""


class ConfigError(PilotWaveError):
    """Invalid configuration: unknown keys, out-of-range parameters."""


class SupportError(ConfigError):
    """An initializer's support does not fit inside the grid."""


class StabilityError(PilotWaveError):
    """A time step violates the solver's stability/accuracy preconditions."""


class NumericalError(PilotWaveError):
    """NaN/Inf detected mid-run; carries the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MaskedFieldError(NumericalError):
    """Every node of a velocity field fell below the density floor."""

    def __init__(self, message):
        super().__init__(message, step=None)


class LeftGridError(PilotWaveError):
    """A trajectory escaped the grid extent."""


class SeparationError(PilotWaveError):
    """Measurement packets failed to separate at readout."""


class EnsembleError(PilotWaveError):
    """Too many ensemble members failed transport (> 1%)."""
