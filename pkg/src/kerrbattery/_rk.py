"""Adaptive embedded Runge-Kutta (Dormand-Prince 8(5,3)) for complex arrays.

The driver can integrate part of the generator exactly: if the state is a
square matrix and ``h_diag`` gives a real diagonal Hamiltonian ``W``, the
flow ``rho -> e^{-iWt} rho e^{iWt}`` is applied analytically
(integrating-factor / Lawson form) and only the remainder ``fun`` goes
through the Runge-Kutta stages. That flow is a unitary conjugation, so
trace and Hermiticity are preserved exactly by the transformation.

DOP853 is used rather than the 5(4) pair because the master equation has
nearly undamped oscillatory modes: the 5(4) pair is weakly unstable on the
imaginary axis beyond |h lambda| ~ 1 and amplifies roundoff there, while
DOP853 is stable on the axis up to |h lambda| ~ 6.

Steps are clipped to land on every requested sample time, so samples carry
no interpolation error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import StepSizeError

_S = _dop.N_STAGES  # 12 stages, plus the FSAL evaluation at the new point
_A = np.ascontiguousarray(_dop.A[:_S, :_S])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_S])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 6.0
_EXPONENT = -1.0 / 8.0


@njit(cache=True, fastmath=True)
def _combine(y, ks, idx, coefs, h, out):
    # out = y + h * sum_j coefs[j] * ks[idx[j]], over the nonzero tableau entries only
    n = y.size
    m = idx.size
    for x in range(n):
        acc = 0j
        for j in range(m):
            acc += coefs[j] * ks[idx[j], x]
        out[x] = y[x] + h * acc


@njit(cache=True)
def _rotate(x, u, out):
    # out = diag(u) x diag(u)^*
    d = x.shape[0]
    for r in range(d):
        ur = u[r]
        for c in range(d):
            out[r, c] = x[r, c] * ur * np.conj(u[c])


@njit(cache=True, fastmath=True)
def _error_norm(y, ynew, ks, idx, e5, e3, h, rtol, atol):
    # Hairer's DOP853 estimate blending the 5th- and 3rd-order embedded errors.
    n = y.size
    s5 = 0.0
    s3 = 0.0
    for x in range(n):
        a5 = 0j
        a3 = 0j
        for j in range(idx.size):
            k = ks[idx[j], x]
            a5 += e5[j] * k
            a3 += e3[j] * k
        v0 = y[x]
        v1 = ynew[x]
        m2 = max(v0.real * v0.real + v0.imag * v0.imag, v1.real * v1.real + v1.imag * v1.imag)
        scale = atol + rtol * np.sqrt(m2)
        inv = 1.0 / (scale * scale)
        s5 += (a5.real * a5.real + a5.imag * a5.imag) * inv
        s3 += (a3.real * a3.real + a3.imag * a3.imag) * inv
    if s5 == 0.0 and s3 == 0.0:
        return 0.0
    return abs(h) * s5 / np.sqrt((s5 + 0.01 * s3) * n)


def _sparse(row):
    idx = np.flatnonzero(row).astype(np.int64)
    return idx, np.ascontiguousarray(row[idx])


_A_SPARSE = [_sparse(_A[i, :i]) for i in range(_S)]
_B_SPARSE = _sparse(_B)
_E_IDX = np.flatnonzero((_E5 != 0) | (_E3 != 0)).astype(np.int64)
_E5_NZ = np.ascontiguousarray(_E5[_E_IDX])
_E3_NZ = np.ascontiguousarray(_E3[_E_IDX])


@dataclass
class IntegratorStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    min_step: float = np.inf
    max_step: float = 0.0


def dormand_prince(
    fun: Callable[[np.ndarray, np.ndarray], None],
    y0: np.ndarray,
    times,
    on_sample: Callable[[int, float, np.ndarray], None],
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    h_diag: np.ndarray | None = None,
    h0: float | None = None,
    max_step: float = np.inf,
    max_steps: int | None = None,
    after_step: Callable[[float, np.ndarray], None] | None = None,
) -> IntegratorStats:
    """Integrate ``y' = fun(y)`` (plus the optional exact diagonal flow).

    ``fun(y, out)`` writes the derivative into ``out``. ``on_sample`` is
    called with the live state at each entry of ``times`` (including the
    first); copy it if you keep it. ``after_step`` runs after every
    accepted step and may raise to abort.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1-d sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if rtol <= 0 or atol < 0:
        raise ValueError("need rtol > 0 and atol >= 0")

    y = np.array(y0, dtype=np.complex128)
    shape = y.shape
    rotating = h_diag is not None
    if rotating:
        w = np.asarray(h_diag, dtype=float)
        if y.ndim != 2 or y.shape != (w.size, w.size):
            raise ValueError("h_diag requires a square state matching its length")

    ks = np.empty((_S + 1, y.size), dtype=np.complex128)
    stage = np.empty(shape, dtype=np.complex128)
    rotated = np.empty(shape, dtype=np.complex128)
    ynew = np.empty(shape, dtype=np.complex128)
    fsal = np.empty(shape, dtype=np.complex128)
    flat_stage = stage.reshape(-1)
    stats = IntegratorStats()

    def eval_stage(i, c, h, src):
        # src is the interaction-picture stage value; fills ks[i] and returns
        # the value in the original frame.
        k = ks[i].reshape(shape)
        if rotating and c != 0.0:
            u = np.exp(-1j * c * h * w)
            _rotate(src, u, rotated)
            fun(rotated, k)
            if i == _S:
                fsal[...] = k
            _rotate(k, np.conj(u), k)
            return rotated
        fun(src, k)
        if i == _S:
            fsal[...] = k
        return src

    t = times[0]
    on_sample(0, t, y)
    if times.size == 1:
        return stats

    fun(y, ks[0].reshape(shape))
    stats.n_rhs += 1
    if h0 is None:
        h = _initial_step(fun, y, ks[0].reshape(shape), rtol, atol)
        stats.n_rhs += 1
    else:
        h = float(h0)
    h = min(h, max_step, times[-1] - t)
    rejected_last = False
    idx = 1

    while idx < times.size:
        target = times[idx]
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepSizeError(f"step size underflow at t={t:.6g} (h={h:.3g})")
        if max_steps is not None and stats.n_steps + stats.n_rejected >= max_steps:
            raise StepSizeError(f"exceeded max_steps={max_steps} at t={t:.6g}")

        landing = t + h >= target - 1e-12 * max(abs(target), 1.0)
        h_try = target - t if landing else h

        flat_y = y.reshape(-1)
        for i in range(1, _S):
            _combine(flat_y, ks, *_A_SPARSE[i], h_try, flat_stage)
            eval_stage(i, _C[i], h_try, stage)
        _combine(flat_y, ks, *_B_SPARSE, h_try, flat_stage)
        ynew[...] = eval_stage(_S, 1.0, h_try, stage)
        stats.n_rhs += _S
        err = _error_norm(flat_y, flat_stage, ks, _E_IDX, _E5_NZ, _E3_NZ, h_try, rtol, atol)

        if err <= 1.0:
            t = target if landing else t + h_try
            stats.n_steps += 1
            stats.min_step = min(stats.min_step, h_try)
            stats.max_step = max(stats.max_step, h_try)
            y, ynew = ynew, y
            ks[0] = fsal.reshape(-1)
            if after_step is not None:
                after_step(t, y)
            factor = _MAX_FACTOR if err == 0 else _SAFETY * err**_EXPONENT
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            h_next = h_try * factor
            if landing and factor >= 1.0:
                # a step shortened to hit a sample says little about the natural size
                h_next = max(h_next, h)
            h = min(h_next, max_step)
            rejected_last = False
            if landing:
                on_sample(idx, t, y)
                idx += 1
        else:
            stats.n_rejected += 1
            h = h_try * max(_MIN_FACTOR, _SAFETY * err**_EXPONENT)
            rejected_last = True
    return stats


def _initial_step(fun, y, f0, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = np.empty_like(y)
    fun(y + h0 * f0, f1)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 8)
    return min(100 * h0, h1)
