"""Exception and warning types raised by the simulator."""


class KerrBatteryError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KerrBatteryError, ValueError):
    """Invalid truncation dimension or mismatched operator shapes."""


class OracleCapError(DimensionError):
    """Dense superoperator requested above the configured size cap."""


class InvalidStateError(KerrBatteryError, ValueError):
    """Input is not a valid density matrix within tolerance."""


class StepSizeError(KerrBatteryError, RuntimeError):
    """Adaptive integrator could not meet its tolerance (step size underflow)."""


class DivergenceError(KerrBatteryError, RuntimeError):
    """Mean-field amplitudes blew past the configured bound."""


class DegenerateSteadyStateError(KerrBatteryError, RuntimeError):
    """The Liouvillian has more than one stationary state."""


class ConfigError(KerrBatteryError, ValueError):
    """Malformed or inconsistent run configuration."""


class TruncationWarning(UserWarning):
    """Top Fock level is populated enough to distort results."""


class RegimeWarning(UserWarning):
    """Parameters fall outside the regime the model was validated in."""
