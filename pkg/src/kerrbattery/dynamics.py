"""Time evolution of the joint charger/battery density matrix.

`evolve` is the production path: an adaptive Dormand-Prince integrator
driving a stencil implementation of the master equation on the
``rho[na, nb, ma, mb]`` view, with the Kerr phase of the battery optionally
integrated exactly. `evolve_expm_oracle` and `steady_state` work with the
dense Liouvillian and exist to cross-check it on small truncations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numba import njit

from ._rk import IntegratorStats, dormand_prince
from .errors import (
    DegenerateSteadyStateError,
    DimensionError,
    InvalidStateError,
    TruncationWarning,
)
from .fock import HilbertSpec
from .model import (
    DEFAULT_ORACLE_CAP,
    ModelParams,
    liouvillian_matrix,
    unvec,
    vec,
)

HERMITICITY_TOL = 1e-8
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8
TAIL_POPULATION_TOL = 1e-4

METHODS = ("kerr-frame", "plain")

# The DOP853 stability region contains the closed left half-disk of radius 6;
# steps are capped at STABLE_RADIUS / (estimated spectral radius).
STABLE_RADIUS = 5.0

DensityMatrix = np.ndarray


# -- states ---------------------------------------------------------------


def check_density_matrix(rho, dim: int | None = None) -> DensityMatrix:
    """Validate Hermiticity, unit trace and positivity; return as complex array."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise DimensionError(f"density matrix must be {dim}x{dim}, got {rho.shape}")
    norm = np.linalg.norm(rho)
    if np.linalg.norm(rho - rho.conj().T) > 1e-10 * max(norm, 1.0):
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidStateError(f"density matrix trace is {tr.real:.12g}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < -POSITIVITY_TOL:
        raise InvalidStateError("density matrix has a negative eigenvalue")
    return rho


def fock_state(spec: HilbertSpec, n_charger: int = 0, n_battery: int = 0) -> DensityMatrix:
    """Projector onto ``|n_charger, n_battery>``."""
    if not (0 <= n_charger < spec.dim_charger and 0 <= n_battery < spec.dim_battery):
        raise DimensionError(f"Fock state ({n_charger}, {n_battery}) outside {spec}")
    rho = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    idx = n_charger * spec.dim_battery + n_battery
    rho[idx, idx] = 1.0
    return rho


def ground_state(spec: HilbertSpec) -> DensityMatrix:
    return fock_state(spec, 0, 0)


@dataclass(frozen=True)
class TimeGrid:
    """``n_samples`` equally spaced times on ``[0, t_end]`` (units of 1/omega0)."""

    t_end: float
    n_samples: int = 400

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")

    @classmethod
    def from_charging_time(cls, T_end: float, g: float, n_samples: int = 400) -> "TimeGrid":
        """Grid ending at dimensionless charging time ``T = g t / pi``."""
        if g <= 0:
            raise ValueError("dimensionless time T = g t / pi needs g > 0")
        return cls(T_end * np.pi / g, n_samples)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, int(self.n_samples))


# -- trajectories ----------------------------------------------------------


@dataclass
class Diagnostics:
    trace_err: np.ndarray
    min_eig: np.ndarray
    herm_drift: np.ndarray
    tail_pop_a: np.ndarray
    tail_pop_b: np.ndarray
    # False when the battery cutoff is physical (two-level battery), not a truncation
    guard_battery_tail: bool = True

    @classmethod
    def empty(cls, n: int, guard_battery_tail: bool = True) -> "Diagnostics":
        return cls(*(np.full(n, np.nan) for _ in range(5)), guard_battery_tail)

    @property
    def worst_tail(self) -> float:
        tail = np.fmax(self.tail_pop_a, self.tail_pop_b) if self.guard_battery_tail else self.tail_pop_a
        return float(np.nanmax(tail, initial=0.0))

    @property
    def truncated(self) -> bool:
        """True when a guarded top Fock level exceeded the population guard."""
        return self.worst_tail > TAIL_POPULATION_TOL

    @property
    def tainted(self) -> bool:
        """True when any sample broke a density-matrix invariant bound."""
        bad = (
            np.nanmax(self.trace_err, initial=0.0) > TRACE_TOL
            or np.nanmax(self.herm_drift, initial=0.0) > HERMITICITY_TOL
            or np.nanmin(self.min_eig, initial=0.0) < -POSITIVITY_TOL
        )
        return bool(bad)


@dataclass
class StateTrajectory:
    times: np.ndarray
    states: list = field(default_factory=list)
    diagnostics: Diagnostics | None = None
    stats: IntegratorStats | None = None

    @property
    def tainted(self) -> bool:
        return self.diagnostics.tainted or self.diagnostics.truncated

    @property
    def truncated(self) -> bool:
        return self.diagnostics.truncated


Observer = Callable[[int, float, DensityMatrix], None]


class _Sampler:
    """Re-symmetrizes each sampled state, records diagnostics, fans out."""

    def __init__(self, spec, times, keep_states, observer, eig_diagnostics, guard_battery_tail=True):
        self.spec = spec
        self.times = times
        self.keep_states = keep_states
        self.observer = observer
        self.eig_diagnostics = eig_diagnostics
        self.diag = Diagnostics.empty(len(times), guard_battery_tail)
        self.states = []

    def __call__(self, idx, t, y):
        spec, d = self.spec, self.diag
        norm = np.linalg.norm(y)
        d.herm_drift[idx] = np.linalg.norm(y - y.conj().T) / max(norm, 1e-300)
        rho = 0.5 * (y + y.conj().T)
        d.trace_err[idx] = abs(np.trace(rho) - 1.0)
        if self.eig_diagnostics:
            d.min_eig[idx] = sla.eigh(rho, eigvals_only=True, subset_by_index=[0, 0])[0]
        pops = np.real(np.diagonal(rho)).reshape(spec.dim_charger, spec.dim_battery)
        d.tail_pop_a[idx] = pops[-1, :].sum()
        d.tail_pop_b[idx] = pops[:, -1].sum()
        if self.keep_states:
            self.states.append(rho)
        if self.observer is not None:
            self.observer(idx, t, rho)

    def trajectory(self, stats=None) -> StateTrajectory:
        traj = StateTrajectory(np.asarray(self.times, dtype=float), self.states, self.diag, stats)
        if traj.truncated:
            warnings.warn(
                f"top Fock level population reached {self.diag.worst_tail:.3g} > {TAIL_POPULATION_TOL:g}; "
                f"enlarge the truncation ({self.spec.dim_charger}x{self.spec.dim_battery})",
                TruncationWarning,
                stacklevel=3,
            )
        return traj


# -- fast right-hand side -------------------------------------------------


@njit(cache=True)
def _lindblad_stencil(R, out, d1, d2, sa, sb, F, g, gamma):
    # R, out: rho[i, j, k, l] = <i_a j_b| rho |k_a l_b>. Diagonal generator
    # d1[i, j] + d2[k, l]; off-diagonal drive, exchange and jump terms as a
    # nearest-neighbour stencil in Fock indices.
    na, nb = R.shape[0], R.shape[1]
    for i in range(na):
        for j in range(nb):
            dij = d1[i, j]
            for k in range(na):
                for l in range(nb):
                    acc = (dij + d2[k, l]) * R[i, j, k, l]
                    hr = 0j
                    if i + 1 < na:
                        hr += F * sa[i + 1] * R[i + 1, j, k, l]
                        if j > 0:
                            hr += g * sa[i + 1] * sb[j] * R[i + 1, j - 1, k, l]
                        if k + 1 < na:
                            acc += gamma * sa[i + 1] * sa[k + 1] * R[i + 1, j, k + 1, l]
                    if i > 0:
                        hr += F * sa[i] * R[i - 1, j, k, l]
                        if j + 1 < nb:
                            hr += g * sa[i] * sb[j + 1] * R[i - 1, j + 1, k, l]
                    if k + 1 < na:
                        hr -= F * sa[k + 1] * R[i, j, k + 1, l]
                        if l > 0:
                            hr -= g * sa[k + 1] * sb[l] * R[i, j, k + 1, l - 1]
                    if k > 0:
                        hr -= F * sa[k] * R[i, j, k - 1, l]
                        if l + 1 < nb:
                            hr -= g * sa[k] * sb[l + 1] * R[i, j, k - 1, l + 1]
                    out[i, j, k, l] = acc - 1j * hr


class LindbladKernel:
    """Master-equation right-hand side on a ``(d, d)`` array, stencil form.

    With ``include_kerr=False`` the battery Kerr energies are left out of
    the diagonal; the caller must then propagate them exactly (see
    :attr:`kerr_diagonal`).
    """

    def __init__(self, params: ModelParams, spec: HilbertSpec, include_kerr: bool = True):
        self.params = params
        self.spec = spec
        na, nb = spec.dim_charger, spec.dim_battery
        p = params
        n_a = np.arange(na, dtype=float)[:, None]
        n_b = np.arange(nb, dtype=float)[None, :]
        energy = p.delta * (n_a + n_b)
        if include_kerr:
            energy = energy + p.U * n_b * (n_b - 1)
        damping = 0.5 * p.gamma * n_a * np.ones_like(n_b)
        self._d1 = np.ascontiguousarray(-1j * energy - damping)
        self._d2 = np.ascontiguousarray(1j * energy - damping)
        self._sa = np.sqrt(np.arange(na + 1, dtype=float))
        self._sb = np.sqrt(np.arange(nb + 1, dtype=float))
        self._shape4 = spec.shape4

    @property
    def kerr_diagonal(self) -> np.ndarray:
        """Kerr energy ``U n_b (n_b - 1)`` on the joint basis, charger-first."""
        n_b = np.arange(self.spec.dim_battery, dtype=float)
        kerr = self.params.U * n_b * (n_b - 1)
        return np.tile(kerr, self.spec.dim_charger)

    def __call__(self, rho: np.ndarray, out: np.ndarray) -> np.ndarray:
        p = self.params
        _lindblad_stencil(
            rho.reshape(self._shape4),
            out.reshape(self._shape4),
            self._d1, self._d2, self._sa, self._sb,
            p.F, p.g, p.gamma,
        )
        return out


def spectral_radius_estimate(kernel, dim: int, n_iter: int = 40, seed: int = 0) -> float:
    """Power-iteration estimate of the generator's spectral radius.

    Converges from below, so a 5% margin is added.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    y = np.empty_like(x)
    best = 0.0
    for _ in range(n_iter):
        x /= np.linalg.norm(x)
        kernel(x, y)
        best = max(best, float(np.linalg.norm(y)))
        x, y = y, x
    return 1.05 * best


# -- propagation ------------------------------------------------------------


def evolve(
    params: ModelParams,
    spec: HilbertSpec,
    grid: TimeGrid,
    rho0: DensityMatrix | None = None,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    method: str = "kerr-frame",
    keep_states: bool = True,
    observer: Observer | None = None,
    eig_diagnostics: bool = True,
    max_steps: int | None = None,
    guard_battery_tail: bool = True,
) -> StateTrajectory:
    """Integrate the master equation from ``rho0`` (default: both modes empty).

    ``method="kerr-frame"`` propagates the diagonal Kerr phase exactly and
    integrates the remainder with Dormand-Prince 8(5,3); for ``U == 0`` it is
    identical to ``"plain"``, which integrates the full generator. Large
    truncations produce large states: pass ``keep_states=False`` and an
    ``observer(idx, t, rho)`` to stream samples instead of storing them.
    Set ``guard_battery_tail=False`` when the battery cutoff is physical
    (a two-level battery) so its upper level does not count as truncation.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    rho0 = ground_state(spec) if rho0 is None else check_density_matrix(rho0, spec.dim)
    use_frame = method == "kerr-frame" and params.U != 0.0
    kernel = LindbladKernel(params, spec, include_kerr=not use_frame)
    sampler = _Sampler(spec, grid.times, keep_states, observer, eig_diagnostics, guard_battery_tail)
    radius = spectral_radius_estimate(kernel, spec.dim)
    stats = dormand_prince(
        kernel,
        rho0,
        grid.times,
        sampler,
        rtol=rtol,
        atol=atol,
        h_diag=kernel.kerr_diagonal if use_frame else None,
        max_step=STABLE_RADIUS / radius if radius > 0 else np.inf,
        max_steps=max_steps,
    )
    return sampler.trajectory(stats)


def oracle_propagator(
    params: ModelParams, spec: HilbertSpec, t: float, max_dim: int = DEFAULT_ORACLE_CAP
) -> np.ndarray:
    """``exp(L t)`` on column-stacked vectors (scaling and squaring)."""
    return sla.expm(liouvillian_matrix(params, spec, max_dim) * t)


def evolve_expm_oracle(
    params: ModelParams,
    spec: HilbertSpec,
    grid: TimeGrid,
    rho0: DensityMatrix | None = None,
    *,
    max_dim: int = DEFAULT_ORACLE_CAP,
    keep_states: bool = True,
    observer: Observer | None = None,
) -> StateTrajectory:
    """Exact propagation ``vec(rho(t)) = exp(L t) vec(rho0)`` at every sample."""
    rho0 = ground_state(spec) if rho0 is None else check_density_matrix(rho0, spec.dim)
    L = liouvillian_matrix(params, spec, max_dim)
    v0 = vec(rho0)
    sampler = _Sampler(spec, grid.times, keep_states, observer, True)
    for idx, t in enumerate(grid.times):
        v = v0 if t == 0 else sla.expm(L * t) @ v0
        sampler(idx, t, unvec(v, spec.dim))
    return sampler.trajectory()


def steady_state(
    params: ModelParams,
    spec: HilbertSpec,
    *,
    max_dim: int = DEFAULT_ORACLE_CAP,
    null_rtol: float = 1e-9,
) -> DensityMatrix:
    """Stationary state as the normalized null vector of the Liouvillian."""
    L = liouvillian_matrix(params, spec, max_dim)
    _, s, vh = np.linalg.svd(L)
    null = s <= null_rtol * s[0]
    if null.sum() > 1:
        raise DegenerateSteadyStateError(
            f"Liouvillian null space has dimension {int(null.sum())}"
        )
    v = vh[-1].conj()
    rho = unvec(v, spec.dim)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(L @ vec(rho))
    if residual > 1e-9:
        raise DegenerateSteadyStateError(f"stationary residual {residual:.3g} exceeds 1e-9")
    return rho

