"""Truncated bosonic Fock-space operators.

Operators are plain dense ``complex128`` arrays flagged read-only, so any
algebra on them returns fresh arrays. Joint two-mode operators use
charger-first ordering: basis index ``n_a * dim_battery + n_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

Operator = np.ndarray


def _frozen(m: np.ndarray) -> Operator:
    m = np.array(m, dtype=np.complex128)
    m.flags.writeable = False
    return m


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise DimensionError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation of the charger (mode a) and battery (mode b) Fock spaces."""

    dim_charger: int = 25
    dim_battery: int = 25

    def __post_init__(self):
        _check_dim(self.dim_charger)
        _check_dim(self.dim_battery)

    @property
    def dim(self) -> int:
        return self.dim_charger * self.dim_battery

    @property
    def shape4(self) -> tuple[int, int, int, int]:
        """Shape of a joint density matrix viewed as ``rho[na, nb, ma, mb]``."""
        return (self.dim_charger, self.dim_battery, self.dim_charger, self.dim_battery)


def annihilation(dim: int) -> Operator:
    """Lowering operator with ``a|n> = sqrt(n)|n-1>`` on ``dim`` levels."""
    dim = _check_dim(dim)
    return _frozen(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1))


def creation(dim: int) -> Operator:
    return adjoint(annihilation(dim))


def number_operator(dim: int) -> Operator:
    dim = _check_dim(dim)
    return _frozen(np.diag(np.arange(dim, dtype=float)))


def identity(dim: int) -> Operator:
    if int(dim) != dim or dim < 1:
        raise DimensionError(f"identity dimension must be a positive integer, got {dim!r}")
    return _frozen(np.eye(int(dim)))


def adjoint(op: Operator) -> Operator:
    return _frozen(np.conj(np.asarray(op)).T)


def tensor(left: Operator, right: Operator) -> Operator:
    """Kronecker product; ``left`` is the slow (outer) index."""
    return _frozen(np.kron(left, right))


def _check_square(op: Operator, dim: int, which: str) -> np.ndarray:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape != (dim, dim):
        raise DimensionError(f"{which} operator must be {dim}x{dim}, got shape {op.shape}")
    return op


def embed_charger(op: Operator, spec: HilbertSpec) -> Operator:
    op = _check_square(op, spec.dim_charger, "charger")
    return tensor(op, identity(spec.dim_battery))


def embed_battery(op: Operator, spec: HilbertSpec) -> Operator:
    op = _check_square(op, spec.dim_battery, "battery")
    return tensor(identity(spec.dim_charger), op)


def commutator(x: Operator, y: Operator) -> np.ndarray:
    return x @ y - y @ x


def is_hermitian(op: Operator, rtol: float = 1e-12) -> bool:
    op = np.asarray(op)
    scale = np.linalg.norm(op)
    return bool(np.linalg.norm(op - op.conj().T) <= rtol * max(scale, np.finfo(float).tiny))
