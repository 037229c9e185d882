"""Kerr battery Hamiltonian and Lindblad generator.

Everything is written in the frame rotating at the drive frequency, so only
the detuning ``delta = omega0 - omega_drive`` appears. Energies are in units
where ``omega0`` is typically 1 and hbar = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, OracleCapError, RegimeWarning
from .fock import (
    HilbertSpec,
    Operator,
    _frozen,
    adjoint,
    annihilation,
    embed_battery,
    embed_charger,
    number_operator,
)

#: Largest joint dimension for which the dense d^2 x d^2 Liouvillian is built.
DEFAULT_ORACLE_CAP = 64


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the charger/battery pair.

    ``U`` and ``delta`` may take either sign; the rest must be non-negative
    (``omega0`` strictly positive).
    """

    omega0: float = 1.0
    delta: float = 0.0
    g: float = 0.0
    F: float = 0.0
    U: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("omega0", "delta", "g", "F", "U", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        for name in ("g", "F", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    def replace(self, **changes) -> "ModelParams":
        fields = {k: getattr(self, k) for k in ("omega0", "delta", "g", "F", "U", "gamma")}
        fields.update(changes)
        return ModelParams(**fields)


def regime_notes(params: ModelParams, spec: HilbertSpec) -> list[str]:
    """Human-readable flags for parameter regimes outside the validated range."""
    notes = []
    if params.U < 0:
        notes.append("unvalidated regime: negative Kerr nonlinearity")
    if abs(params.U) * (spec.dim_battery - 1) >= 10 * params.omega0:
        notes.append(
            "strong Kerr term: |U|(dim_battery-1) >= 10 omega0, "
            "upper battery levels act only through truncation"
        )
    return notes


def check_regime(params: ModelParams, spec: HilbertSpec) -> list[str]:
    notes = regime_notes(params, spec)
    for note in notes:
        warnings.warn(note, RegimeWarning, stacklevel=3)
    return notes


def battery_levels(params: ModelParams, dim_battery: int) -> np.ndarray:
    """Kerr ladder ``omega0*n + U*n*(n-1)`` indexed by Fock number."""
    n = np.arange(dim_battery, dtype=float)
    return params.omega0 * n + params.U * n * (n - 1)


def battery_hamiltonian(params: ModelParams, dim_battery: int) -> Operator:
    """Battery energy operator ``omega0 b^dag b + U b^dag b^dag b b`` (diagonal)."""
    return _frozen(np.diag(battery_levels(params, dim_battery)))


@lru_cache(maxsize=32)
def _operators(spec: HilbertSpec):
    a = embed_charger(annihilation(spec.dim_charger), spec)
    b = embed_battery(annihilation(spec.dim_battery), spec)
    na = embed_charger(number_operator(spec.dim_charger), spec)
    nb = embed_battery(number_operator(spec.dim_battery), spec)
    return a, b, na, nb


def hamiltonian(params: ModelParams, spec: HilbertSpec) -> Operator:
    """Rotating-frame Hamiltonian with RWA charger-battery exchange.

    H = delta (a^dag a + b^dag b) + g (a b^dag + a^dag b) + F (a^dag + a)
        + U b^dag b^dag b b
    """
    a, b, na, nb = _operators(spec)
    ad, bd = adjoint(a), adjoint(b)
    h = (
        params.delta * (na + nb)
        + params.g * (a @ bd + ad @ b)
        + params.F * (ad + a)
        + params.U * (bd @ bd @ b @ b)
    )
    return _frozen(h)


def _check_rho(rho: np.ndarray, spec: HilbertSpec) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (spec.dim, spec.dim):
        raise DimensionError(
            f"density matrix must be {spec.dim}x{spec.dim} for {spec}, got {rho.shape}"
        )
    return rho


def lindblad_rhs(params: ModelParams, spec: HilbertSpec, rho: np.ndarray) -> np.ndarray:
    """Time derivative of ``rho`` under the master equation.

    Only the charger is damped: ``-i[H, rho] + gamma/2 (2 a rho a^dag - {a^dag a, rho})``.
    Dense reference implementation; the integrator uses a stencil kernel.
    """
    rho = _check_rho(rho, spec)
    h = hamiltonian(params, spec)
    a, _, na, _ = _operators(spec)
    out = -1j * (h @ rho - rho @ h)
    if params.gamma:
        out += 0.5 * params.gamma * (2 * a @ rho @ a.conj().T - na @ rho - rho @ na)
    return out


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape((dim, dim), order="F")


def liouvillian_matrix(
    params: ModelParams, spec: HilbertSpec, max_dim: int = DEFAULT_ORACLE_CAP
) -> np.ndarray:
    """Dense superoperator acting on column-stacked ``vec(rho)``.

    Meant for exact-propagation checks on small truncations; refuses joint
    dimensions above ``max_dim`` (the matrix has ``dim**4`` entries).
    """
    d = spec.dim
    if d > max_dim:
        raise OracleCapError(
            f"joint dimension {d} exceeds the dense-Liouvillian cap {max_dim}"
        )
    h = np.asarray(hamiltonian(params, spec))
    a, _, na, _ = _operators(spec)
    eye = np.eye(d)
    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    if params.gamma:
        L += 0.5 * params.gamma * (
            2 * np.kron(a.conj(), a) - np.kron(eye, na) - np.kron(na.T, eye)
        )
    return L
