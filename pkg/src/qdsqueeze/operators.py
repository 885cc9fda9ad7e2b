"""Dense operators on the exciton ⊗ truncated-Fock space.

Basis ordering is |s⟩ ⊗ |n⟩ with s ∈ {g, e} and n = 0..N, so the flat
index of |s, n⟩ is ``s * (N + 1) + n``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PhysicalityError

GROUND, EXCITED = 0, 1


@dataclass(frozen=True)
class SpaceDescriptor:
    fock_truncation: int

    def __post_init__(self):
        if self.fock_truncation < 1:
            raise InvalidParameterError("fock_truncation must be >= 1", "fock_truncation")

    @property
    def n_fock(self) -> int:
        return self.fock_truncation + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_fock

    def index(self, s: int, n: int) -> int:
        if s not in (GROUND, EXCITED) or not 0 <= n <= self.fock_truncation:
            raise InvalidParameterError(f"no basis state |{s}, {n}> in this space")
        return s * self.n_fock + n


@dataclass(frozen=True, eq=False)
class OperatorSet:
    space: SpaceDescriptor
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    a: np.ndarray
    a_dag: np.ndarray
    identity: np.ndarray

    @property
    def exciton_number(self) -> np.ndarray:
        return self.sigma_plus @ self.sigma_minus

    @property
    def photon_number(self) -> np.ndarray:
        return self.a_dag @ self.a


@functools.lru_cache(maxsize=32)
def _build(N: int) -> OperatorSet:
    space = SpaceDescriptor(N)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    annihilate = np.diag(np.sqrt(np.arange(1, N + 1)), 1).astype(complex)
    sigma_minus = np.kron(lower, np.eye(N + 1))
    a = np.kron(np.eye(2), annihilate)
    ops = OperatorSet(
        space,
        sigma_minus,
        sigma_minus.conj().T.copy(),
        a,
        a.conj().T.copy(),
        np.eye(space.dim, dtype=complex),
    )
    for m in (ops.sigma_minus, ops.sigma_plus, ops.a, ops.a_dag, ops.identity):
        m.setflags(write=False)
    return ops


def build_operators(space: SpaceDescriptor | int) -> OperatorSet:
    """σ-, σ+, a, a† and the identity for a given Fock truncation (cached)."""
    N = space.fock_truncation if isinstance(space, SpaceDescriptor) else int(space)
    if N < 1:
        raise InvalidParameterError("fock_truncation must be >= 1", "fock_truncation")
    return _build(N)


def basis_state(space: SpaceDescriptor, s: int, n: int) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(s, n)] = 1.0
    return psi


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def expectation(rho, A) -> complex:
    """Tr(ρ A)."""
    rho = np.asarray(rho)
    A = np.asarray(A)
    if rho.shape != A.shape or rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidParameterError(f"shape mismatch: rho {rho.shape} vs operator {A.shape}")
    # Tr(ρA) = Σ_ij ρ_ij A_ji
    return complex(np.einsum("ij,ji->", rho, A))


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8) -> float:
    """Raise :class:`PhysicalityError` unless ρ is a valid density matrix; returns min eigenvalue."""
    rho = np.asarray(rho)
    scale = max(1.0, float(np.abs(rho).max()))
    if np.abs(rho - rho.conj().T).max() > herm_tol * scale:
        raise PhysicalityError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise PhysicalityError(f"density matrix trace is {tr}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if min_eig < -pos_tol:
        raise PhysicalityError(f"density matrix has eigenvalue {min_eig:.3g}")
    return min_eig


def exciton_reduced(rho, space: SpaceDescriptor) -> np.ndarray:
    """Partial trace over the cavity, giving the 2×2 exciton state."""
    n = space.n_fock
    r = np.asarray(rho).reshape(2, n, 2, n)
    return np.einsum("injn->ij", r)
