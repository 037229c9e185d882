"""Mean-field amplitude equations for the charger and battery modes.

Moments are factorized into products of the coherent amplitudes
``alpha = <a>`` and ``beta = <b>``. For ``U = 0`` the dynamics is linear and a
vacuum start stays coherent, so the factorization is exact there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rk import dormand_prince
from .dynamics import TimeGrid
from .errors import DivergenceError
from .model import ModelParams
from .observables import ObservableTrajectory, average_power


@dataclass(frozen=True)
class MeanFieldState:
    alpha: complex = 0j
    beta: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=np.complex128)


def meanfield_rhs(state: MeanFieldState, params: ModelParams) -> MeanFieldState:
    """Time derivatives of the two amplitudes."""
    a, b = complex(state.alpha), complex(state.beta)
    da = -(1j * params.delta + 0.5 * params.gamma) * a - 1j * params.g * b - 1j * params.F
    db = -1j * params.delta * b - 1j * params.g * a - 2j * params.U * b.conjugate() * b * b
    return MeanFieldState(da, db)


def meanfield_energy(beta, params: ModelParams):
    """Mean-field battery energy ``omega0 |beta|^2 + U |beta|^4``."""
    nb = np.abs(beta) ** 2
    return params.omega0 * nb + params.U * nb**2


def meanfield_amplitudes(
    params: ModelParams,
    grid: TimeGrid,
    initial: MeanFieldState | None = None,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    bound: float = 1e6,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the amplitudes; returns ``(times, alpha, beta)`` on the grid."""
    if initial is None:
        initial = MeanFieldState()
    times = grid.times
    alpha = np.empty(times.size, dtype=np.complex128)
    beta = np.empty(times.size, dtype=np.complex128)
    k1 = -(1j * params.delta + 0.5 * params.gamma)
    drive = -1j * params.F

    def fun(y, out):
        a, b = y[0], y[1]
        out[0] = k1 * a - 1j * params.g * b + drive
        out[1] = -1j * params.delta * b - 1j * params.g * a - 2j * params.U * np.conj(b) * b * b

    def guard(t, y):
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > bound:
            raise DivergenceError(f"mean-field amplitudes exceeded {bound:g} at t={t:.6g}")

    def on_sample(idx, t, y):
        alpha[idx], beta[idx] = y[0], y[1]

    y0 = initial.as_array()
    guard(times[0], y0)
    dormand_prince(fun, y0, times, on_sample, rtol=rtol, atol=atol, after_step=guard)
    return times, alpha, beta


def meanfield_evolve(
    params: ModelParams,
    grid: TimeGrid,
    initial: MeanFieldState | None = None,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    bound: float = 1e6,
) -> ObservableTrajectory:
    """Mean-field stored-energy curve.

    Only ``E_B`` and ``P_B`` are filled; ``E_A``, ``W`` and ``ratio`` are NaN
    because the factorized model carries no density matrix.
    """
    times, _, beta = meanfield_amplitudes(params, grid, initial, rtol=rtol, atol=atol, bound=bound)
    E_B = meanfield_energy(beta, params)
    blank = np.full(times.size, np.nan)
    return ObservableTrajectory(
        times=times,
        T=params.g * times / np.pi,
        E_B=E_B,
        E_A=blank,
        W=blank.copy(),
        P_B=average_power(times, E_B),
        ratio=blank.copy(),
        label="meanfield",
    )
