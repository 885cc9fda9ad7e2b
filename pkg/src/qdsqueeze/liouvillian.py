"""Polaron-frame Hamiltonian and master-equation generators as superoperators.

Density matrices are vectorized by column stacking, so that
vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ).  All frequencies are in rad/ps (ħ = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .operators import OperatorSet, SpaceDescriptor, build_operators
from .phonons import IncoherentRates, PhononBathModel, bath_model, incoherent_rates, spline_fourier
from .units import UNITS, PhysicalParams


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim=None) -> np.ndarray:
    v = np.asarray(v)
    dim = dim or int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order="F")


def spre(A) -> np.ndarray:
    """Superoperator for ρ ↦ Aρ."""
    return np.kron(np.eye(A.shape[0]), A)


def spost(B) -> np.ndarray:
    """Superoperator for ρ ↦ ρB."""
    return np.kron(B.T, np.eye(B.shape[0]))


def sprepost(A, B) -> np.ndarray:
    """Superoperator for ρ ↦ AρB."""
    return np.kron(B.T, A)


def commutator(H) -> np.ndarray:
    """Superoperator for ρ ↦ -i[H, ρ]."""
    return -1j * (spre(H) - spost(H))


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on column-stacked density matrices."""

    matrix: np.ndarray
    space: SpaceDescriptor

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.space.dim)

    def trace_residual(self) -> float:
        """max |vec(1)† L|, zero for a trace-preserving generator."""
        return float(np.abs(vec(np.eye(self.space.dim)) @ self.matrix).max())

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.space != self.space:
            raise InvalidParameterError("cannot add superoperators on different spaces")
        return Superoperator(self.matrix + other.matrix, self.space)


def _space_of(op) -> SpaceDescriptor:
    dim = op.shape[0]
    if dim % 2 or op.shape != (dim, dim):
        raise InvalidParameterError(f"operator shape {op.shape} is not on an exciton x Fock space")
    return SpaceDescriptor(dim // 2 - 1)


def build_hamiltonian(p: PhysicalParams, ops: OperatorSet | None = None) -> np.ndarray:
    """Δ̃_xl σ+σ- + Δ_cl a†a + (Ω_R/2)(σ+ + σ-) + g_R(σ+a + a†σ-) in rad/ps."""
    ops = ops or build_operators(p.fock_truncation)
    u = UNITS.ueV_to_angular
    sp, sm, a, ad = ops.sigma_plus, ops.sigma_minus, ops.a, ops.a_dag
    return (
        u(p.delta_xl) * (sp @ sm)
        + u(p.delta_cl) * (ad @ a)
        + 0.5 * u(p.omega_R) * (sp + sm)
        + u(p.g_R) * (sp @ a + ad @ sm)
    )


def free_hamiltonian(p: PhysicalParams, ops: OperatorSet | None = None) -> np.ndarray:
    """Δ̃_xl σ+σ- + Δ_cl a†a, the uncoupled part of the system Hamiltonian."""
    ops = ops or build_operators(p.fock_truncation)
    u = UNITS.ueV_to_angular
    return u(p.delta_xl) * ops.exciton_number + u(p.delta_cl) * ops.photon_number


def interaction_operators(p: PhysicalParams, ops: OperatorSet, B: float):
    """Phonon-fluctuation coupling operators (X_g, X_u) with bare Ω = Ω_R/B, g = g_R/B."""
    u = UNITS.ueV_to_angular
    omega, g = u(p.omega_R) / B, u(p.g_R) / B
    sp, sm, a, ad = ops.sigma_plus, ops.sigma_minus, ops.a, ops.a_dag
    x_g = 0.5 * omega * (sp + sm) + g * (sp @ a + ad @ sm)
    x_u = 0.5j * omega * (sp - sm) + 1j * g * (sp @ a - ad @ sm)
    return x_g, x_u


def lindblad_dissipator(c, rate) -> Superoperator:
    """rate · (cρc† - ½{c†c, ρ})."""
    if rate < 0:
        raise InvalidParameterError(f"dissipator rate must be >= 0, got {rate}", "rate")
    c = np.asarray(c, dtype=complex)
    space = _space_of(c)
    if rate == 0:
        return Superoperator(np.zeros((space.dim**2,) * 2, dtype=complex), space)
    n = c.conj().T @ c
    return Superoperator(rate * (sprepost(c, c.conj().T) - 0.5 * spre(n) - 0.5 * spost(n)), space)


def _phenomenological(p: PhysicalParams, ops: OperatorSet) -> np.ndarray:
    u = UNITS.ueV_to_angular
    return (
        lindblad_dissipator(ops.sigma_minus, u(p.gamma)).matrix
        + lindblad_dissipator(ops.exciton_number, u(p.gamma_prime)).matrix
        + lindblad_dissipator(ops.a, u(p.kappa)).matrix
    )


def build_effective_liouvillian(
    p: PhysicalParams,
    model: PhononBathModel | None = None,
    ops: OperatorSet | None = None,
    rates: IncoherentRates | None = None,
) -> Superoperator:
    """Generator of the effective polaron master equation.

    Coherent part from :func:`build_hamiltonian`, radiative decay, pure
    dephasing and cavity loss, plus the four phonon-induced channels
    σ+, σ-, σ+a and a†σ- (all zero with phonons disabled).
    """
    ops = ops or build_operators(p.fock_truncation)
    if rates is None:
        rates = incoherent_rates(p, model)
    L = commutator(build_hamiltonian(p, ops)) + _phenomenological(p, ops)
    sp, sm, a, ad = ops.sigma_plus, ops.sigma_minus, ops.a, ops.a_dag
    for c, r in (
        (sp, rates.gamma_sigma_plus),
        (sm, rates.gamma_sigma_minus),
        (sp @ a, rates.gamma_sigma_plus_a),
        (ad @ sm, rates.gamma_a_dag_sigma_minus),
    ):
        if r:
            L = L + lindblad_dissipator(c, r).matrix
    return Superoperator(L, ops.space)


def build_full_generator(
    p: PhysicalParams,
    model: PhononBathModel | None = None,
    ops: OperatorSet | None = None,
    free_evolution: bool = False,
) -> Superoperator:
    """Second-order Born (time-convolutionless) polaron generator.

    The phonon term is -Σ_m ([X_m, X̃_m ρ] + H.c.) with
    X̃_m = ∫ G_m(τ) e^{-iHτ} X_m e^{iHτ} dτ, evaluated in the eigenbasis of
    the full system Hamiltonian (or of the uncoupled one with
    ``free_evolution=True``).  No secular approximation is made.
    """
    ops = ops or build_operators(p.fock_truncation)
    H = build_hamiltonian(p, ops)
    L = commutator(H) + _phenomenological(p, ops)
    if not p.phonons_enabled or p.bath.alpha_p == 0:
        return Superoperator(L, ops.space)
    if model is None:
        model = bath_model(p.bath, p.temperature)
    x_g, x_u = interaction_operators(p, ops, model.B)
    evals, V = np.linalg.eigh(free_hamiltonian(p, ops) if free_evolution else H)
    bohr = np.subtract.outer(evals, evals)
    Vh = V.conj().T
    for X, spline in zip((x_g, x_u), model.green_splines):
        g_hat = spline_fourier(spline, bohr.ravel(), sign=-1).reshape(bohr.shape)
        X_t = V @ ((Vh @ X @ V) * g_hat) @ Vh
        X_td = X_t.conj().T
        L = L - (spre(X @ X_t) - sprepost(X_t, X) + spost(X_td @ X) - sprepost(X, X_td))
    return Superoperator(L, ops.space)
