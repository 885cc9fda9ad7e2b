"""Steady states, fixed-step propagation and Fock-truncation control."""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    AmbiguousSteadyStateError,
    ConvergenceError,
    InvalidParameterError,
    StepSizeError,
)
from .liouvillian import Superoperator, build_effective_liouvillian, build_full_generator, unvec, vec
from .operators import SpaceDescriptor, build_operators, check_density_matrix, expectation
from .phonons import PhononBathModel, bath_model, incoherent_rates
from .units import PhysicalParams

LOGGER = logging.getLogger(__name__)

FOCK_CAP = 64
VARIANCE_TOL = 1e-4
TAIL_TOL = 1e-6
# reciprocal condition number below which a second stationary state is assumed
RCOND_MIN = 1e-13


@dataclass(frozen=True, eq=False)
class SteadyStateSolution:
    rho: np.ndarray
    residual: float
    rcond: float
    space: SpaceDescriptor
    min_eigenvalue: float


def steady_state(L: Superoperator) -> SteadyStateSolution:
    """Solve L vec(ρ) = 0 with Tr ρ = 1 by dense LU.

    The row of ρ_00 is replaced by the trace constraint.  Raises
    :class:`AmbiguousSteadyStateError` when the stationary state is not
    unique and :class:`PhysicalityError` when ρ is not positive.
    """
    dim = L.space.dim
    M = np.array(L.matrix, dtype=complex)
    trace_row = vec(np.eye(dim))
    M[0, :] = trace_row
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        # exact singularity is reported through rcond below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(M, check_finite=True)
    anorm = np.abs(M).sum(axis=0).max()
    rcond, info = linalg.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise AmbiguousSteadyStateError(
            f"trace-constrained Liouvillian is singular (rcond = {rcond:.3g}); the steady state is not unique"
        )
    x = linalg.lu_solve((lu, piv), rhs)
    rho = unvec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.abs(L.matrix @ vec(rho)).max())
    lnorm = float(np.abs(L.matrix).sum(axis=1).max())
    if residual > 1e-9 * max(lnorm, 1e-300):
        raise AmbiguousSteadyStateError(f"steady-state residual {residual:.3g} exceeds 1e-9 ||L||")
    min_eig = check_density_matrix(rho, pos_tol=1e-7)
    return SteadyStateSolution(rho, residual, float(rcond), L.space, min_eig)


def _rk4_step_matrix(L: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for a linear autonomous system, as a matrix."""
    A = L * dt
    eye = np.eye(A.shape[0], dtype=complex)
    A2 = A @ A
    return eye + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24


def evolve(L: Superoperator, rho0, t_final, dt) -> np.ndarray:
    """Integrate dρ/dt = L ρ from 0 to ``t_final`` (ps) with fixed-step RK4.

    The step is shrunk so that it divides ``t_final`` exactly.  For a
    linear generator the RK4 update is a fixed matrix, so repeated steps
    are applied by binary powering.
    """
    if t_final < 0 or dt <= 0:
        raise InvalidParameterError("need t_final >= 0 and dt > 0")
    rho0 = np.asarray(rho0, dtype=complex)
    if t_final == 0:
        return rho0.copy()
    n_steps = max(1, math.ceil(t_final / dt - 1e-12))
    step = _rk4_step_matrix(L.matrix, t_final / n_steps)
    v = np.linalg.matrix_power(step, n_steps) @ vec(rho0)
    rho = unvec(v, L.space.dim)
    if not np.all(np.isfinite(rho)):
        raise StepSizeError(f"RK4 diverged with dt = {t_final / n_steps:.3g} ps")
    drift = abs(np.trace(rho) - np.trace(rho0))
    norm_growth = np.linalg.norm(rho) - max(np.linalg.norm(rho0), 1.0)
    if drift > 1e-6 or norm_growth > 1e-6:
        raise StepSizeError(
            f"RK4 unstable with dt = {t_final / n_steps:.3g} ps (trace drift {drift:.3g}, norm growth {norm_growth:.3g})"
        )
    return rho


def trace_distance(rho, sigma) -> float:
    """Trace norm ‖ρ - σ‖₁ for Hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def build_generator(p: PhysicalParams, model=None, method="effective", rates=None) -> Superoperator:
    """Effective (``method="effective"``) or full Born (``"full"``) generator for ``p``."""
    ops = build_operators(p.fock_truncation)
    if method == "effective":
        return build_effective_liouvillian(p, model, ops, rates)
    if method == "full":
        return build_full_generator(p, model, ops)
    raise InvalidParameterError(f"unknown generator method {method!r}", "method")


def solve_point(p: PhysicalParams, model=None, method="effective", rates=None) -> SteadyStateSolution:
    return steady_state(build_generator(p, model, method, rates))


def _variance(sol: SteadyStateSolution) -> float:
    ops = build_operators(sol.space)
    pop = expectation(sol.rho, ops.exciton_number).real
    coh = expectation(sol.rho, ops.sigma_minus)
    return 2 * (pop - 2 * abs(coh) ** 2)


def _top_fock_population(sol: SteadyStateSolution) -> float:
    space = sol.space
    N = space.fock_truncation
    return float(sol.rho[space.index(0, N), space.index(0, N)].real + sol.rho[space.index(1, N), space.index(1, N)].real)


def converge_truncation(
    p: PhysicalParams,
    model: PhononBathModel | None = None,
    method="effective",
    cap=FOCK_CAP,
    rates=None,
) -> tuple[int, SteadyStateSolution]:
    """Double the Fock cutoff from ``p.fock_truncation`` until the variance is stable.

    Converged at N when |variance(N) - variance(2N)| < 1e-4 and the
    population of the top Fock level at N is below 1e-6.  Returns
    ``(N, solution at N)``.  Precomputed ``rates`` may be passed for the
    effective generator.
    """
    if p.phonons_enabled and p.bath.alpha_p > 0 and model is None:
        model = bath_model(p.bath, p.temperature)
    if method == "effective" and rates is None:
        rates = incoherent_rates(p, model)
    N = p.fock_truncation
    if N > cap:
        raise ConvergenceError(f"initial truncation {N} exceeds the cap {cap}")
    current = solve_point(p, model, method, rates)
    while True:
        if 2 * N > cap:
            raise ConvergenceError(f"Fock truncation did not converge below N = {cap}")
        finer = solve_point(dataclasses.replace(p, fock_truncation=2 * N), model, method, rates)
        stable = abs(_variance(current) - _variance(finer)) < VARIANCE_TOL
        if stable and _top_fock_population(current) < TAIL_TOL:
            return N, current
        LOGGER.debug("truncation N=%d not converged, doubling", N)
        N, current = 2 * N, finer
