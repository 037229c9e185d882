"""Driven-dissipative charger coupled to a Kerr-anharmonic quantum battery."""

from .dynamics import (
    StateTrajectory,
    TimeGrid,
    evolve,
    evolve_expm_oracle,
    fock_state,
    ground_state,
    steady_state,
)
from .errors import (
    ConfigError,
    DegenerateSteadyStateError,
    DimensionError,
    DivergenceError,
    InvalidStateError,
    KerrBatteryError,
    OracleCapError,
    RegimeWarning,
    StepSizeError,
    TruncationWarning,
)
from .fock import HilbertSpec
from .harness import Scenario, preset, qubit_limit_check, run_scenario, sweep
from .meanfield import MeanFieldState, meanfield_evolve, meanfield_rhs
from .model import ModelParams, hamiltonian, liouvillian_matrix, lindblad_rhs
from .observables import (
    ErgotropyResult,
    ObservableTrajectory,
    battery_energy,
    charger_energy,
    charging_power,
    ergotropy,
    find_optimum,
    partial_trace_battery,
)

__all__ = [
    "ConfigError",
    "DegenerateSteadyStateError",
    "DimensionError",
    "DivergenceError",
    "ErgotropyResult",
    "HilbertSpec",
    "InvalidStateError",
    "KerrBatteryError",
    "MeanFieldState",
    "ModelParams",
    "ObservableTrajectory",
    "OracleCapError",
    "RegimeWarning",
    "Scenario",
    "StateTrajectory",
    "StepSizeError",
    "TimeGrid",
    "TruncationWarning",
    "battery_energy",
    "charger_energy",
    "charging_power",
    "ergotropy",
    "evolve",
    "evolve_expm_oracle",
    "find_optimum",
    "fock_state",
    "ground_state",
    "hamiltonian",
    "liouvillian_matrix",
    "lindblad_rhs",
    "meanfield_evolve",
    "meanfield_rhs",
    "partial_trace_battery",
    "preset",
    "qubit_limit_check",
    "run_scenario",
    "steady_state",
    "sweep",
]
