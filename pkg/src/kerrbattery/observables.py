"""Battery figures of merit: stored energy, ergotropy, charging power."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Diagnostics, StateTrajectory
from .errors import DimensionError, InvalidStateError
from .fock import HilbertSpec
from .model import ModelParams, battery_levels

# E_B below this counts as "not charged" when forming W / E_B.
RATIO_FLOOR = 1e-12


def partial_trace_battery(rho, spec: HilbertSpec) -> np.ndarray:
    """Reduced battery state ``Tr_A rho`` (charger-first ordering)."""
    rho = np.asarray(rho)
    if rho.shape != (spec.dim, spec.dim):
        raise DimensionError(f"expected a {spec.dim}x{spec.dim} joint state, got {rho.shape}")
    return np.einsum("ijil->jl", rho.reshape(spec.shape4))


def partial_trace_charger(rho, spec: HilbertSpec) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (spec.dim, spec.dim):
        raise DimensionError(f"expected a {spec.dim}x{spec.dim} joint state, got {rho.shape}")
    return np.einsum("ijkj->ik", rho.reshape(spec.shape4))


def battery_energy(rho_b, params: ModelParams) -> float:
    """``Tr[rho_B (omega0 b^dag b + U b^dag b^dag b b)]``."""
    rho_b = np.asarray(rho_b)
    levels = battery_levels(params, rho_b.shape[0])
    return float(np.real(np.diagonal(rho_b) @ levels))


def charger_energy(rho, spec: HilbertSpec, params: ModelParams) -> float:
    """``omega0 <a^dag a>`` on the joint state."""
    rho = np.asarray(rho)
    if rho.shape != (spec.dim, spec.dim):
        raise DimensionError(f"expected a {spec.dim}x{spec.dim} joint state, got {rho.shape}")
    pops = np.real(np.diagonal(rho)).reshape(spec.dim_charger, spec.dim_battery)
    return float(params.omega0 * (np.arange(spec.dim_charger) @ pops.sum(axis=1)))


@dataclass
class ErgotropyResult:
    stored_energy: float
    passive_energy: float
    ergotropy: float
    eigenvalues: np.ndarray  # descending
    battery_levels: np.ndarray  # ascending
    clipped: bool = False


def ergotropy(rho_b, params: ModelParams, herm_tol: float = 1e-10) -> ErgotropyResult:
    """Extractable work relative to the passive rearrangement of ``rho_b``.

    The passive state puts the largest eigenvalue of ``rho_b`` on the lowest
    battery level, the next on the next, and so on. Levels are sorted by
    energy, not by Fock index, which matters only for negative ``U``.
    """
    rho_b = np.asarray(rho_b, dtype=np.complex128)
    if rho_b.ndim != 2 or rho_b.shape[0] != rho_b.shape[1]:
        raise InvalidStateError(f"battery state must be square, got {rho_b.shape}")
    if np.linalg.norm(rho_b - rho_b.conj().T) > herm_tol * max(np.linalg.norm(rho_b), 1.0):
        raise InvalidStateError("battery state is not Hermitian")

    stored = battery_energy(rho_b, params)
    r = np.linalg.eigvalsh(rho_b)[::-1]
    total = r.sum()
    r = np.clip(r, 0.0, None)
    clipped = bool(abs(r.sum() - total) > 1e-10)
    if clipped:
        r = r * (total / r.sum())
    levels = np.sort(battery_levels(params, rho_b.shape[0]))
    passive = float(r @ levels)
    return ErgotropyResult(stored, passive, stored - passive, r, levels, clipped)


@dataclass
class ObservableTrajectory:
    """Figure-level series sampled on a common time grid."""

    times: np.ndarray
    T: np.ndarray  # dimensionless charging time g t / pi
    E_B: np.ndarray
    E_A: np.ndarray
    W: np.ndarray
    P_B: np.ndarray
    ratio: np.ndarray
    diagnostics: Diagnostics | None = None
    tainted: bool = False
    truncated: bool = False
    clipped: bool = False
    notes: list = field(default_factory=list)
    label: str = ""

    def __len__(self):
        return len(self.times)

    @property
    def dimensionless_T(self) -> np.ndarray:
        return self.T


def average_power(times, E_B) -> np.ndarray:
    """``E_B(t) / t``, with the t = 0 value defined as 0."""
    times = np.asarray(times, dtype=float)
    E_B = np.asarray(E_B, dtype=float)
    out = np.zeros_like(E_B)
    pos = times > 0
    out[pos] = E_B[pos] / times[pos]
    return out


def charging_power(traj: ObservableTrajectory) -> np.ndarray:
    return average_power(traj.times, traj.E_B)


def energy_ratio(W, E_B) -> np.ndarray:
    """``W / E_B``; NaN where the battery is still empty."""
    W = np.asarray(W, dtype=float)
    E_B = np.asarray(E_B, dtype=float)
    out = np.full_like(E_B, np.nan)
    ok = np.abs(E_B) > RATIO_FLOOR
    out[ok] = W[ok] / E_B[ok]
    return out


def find_optimum(traj: ObservableTrajectory) -> tuple[float, float]:
    """``(t_max, E_max)`` over the sampled grid; the earliest maximum wins ties."""
    if len(traj.E_B) == 0:
        raise ValueError("empty trajectory")
    i = int(np.nanargmax(traj.E_B))
    return float(traj.times[i]), float(traj.E_B[i])


class TrajectoryObserver:
    """Evolution observer that reduces each sampled state to observables.

    Pass an instance as ``observer=`` to :func:`kerrbattery.dynamics.evolve`
    (with ``keep_states=False`` for big truncations), then call
    :meth:`finish` with the returned state trajectory.
    """

    def __init__(self, params: ModelParams, spec: HilbertSpec, n_samples: int):
        self.params = params
        self.spec = spec
        self.E_B = np.full(n_samples, np.nan)
        self.E_A = np.full(n_samples, np.nan)
        self.W = np.full(n_samples, np.nan)
        self.clipped = False

    def __call__(self, idx: int, t: float, rho: np.ndarray) -> None:
        rho_b = partial_trace_battery(rho, self.spec)
        erg = ergotropy(rho_b, self.params)
        self.E_B[idx] = erg.stored_energy
        self.W[idx] = erg.ergotropy
        self.E_A[idx] = charger_energy(rho, self.spec, self.params)
        self.clipped |= erg.clipped

    def finish(self, states: StateTrajectory, label: str = "", notes=()) -> ObservableTrajectory:
        times = np.asarray(states.times, dtype=float)
        return ObservableTrajectory(
            times=times,
            T=self.params.g * times / np.pi,
            E_B=self.E_B,
            E_A=self.E_A,
            W=self.W,
            P_B=average_power(times, self.E_B),
            ratio=energy_ratio(self.W, self.E_B),
            diagnostics=states.diagnostics,
            tainted=states.tainted,
            truncated=states.truncated,
            clipped=self.clipped,
            notes=list(notes),
            label=label,
        )


def observe(states: StateTrajectory, params: ModelParams, spec: HilbertSpec, label: str = "") -> ObservableTrajectory:
    """Observables for a trajectory whose states were kept in memory."""
    obs = TrajectoryObserver(params, spec, len(states.times))
    for idx, (t, rho) in enumerate(zip(states.times, states.states)):
        obs(idx, t, rho)
    return obs.finish(states, label)
