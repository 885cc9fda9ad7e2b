import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdsqueeze.errors import AmbiguousSteadyStateError, ConvergenceError, InvalidParameterError, StepSizeError
from qdsqueeze.liouvillian import Superoperator, build_effective_liouvillian
from qdsqueeze.operators import GROUND, basis_state, build_operators, expectation, pure_density
from qdsqueeze.steady import converge_truncation, evolve, solve_point, steady_state, trace_distance
from qdsqueeze.units import UNITS, PhysicalParams

u = UNITS.ueV_to_angular


def bloch_oracle(omega, delta, gamma, gamma_prime):
    """Steady (ρ_ee, ⟨σ-⟩) of a driven two-level system from a 3×3 linear solve.

    Unknowns x = (ρ_ee, Re⟨σ-⟩, Im⟨σ-⟩), all frequencies in rad/ps.
    """
    g2 = (gamma + gamma_prime) / 2
    # d⟨σ-⟩/dt = -(iΔ + g2)⟨σ-⟩ + i(Ω/2)(2ρ_ee - 1);  dρ_ee/dt = -γρ_ee - Ω Im⟨σ-⟩
    A = np.array(
        [
            [-gamma, 0.0, -omega],
            [0.0, -g2, delta],
            [omega, -delta, -g2],
        ]
    )
    b = np.array([0.0, 0.0, omega / 2])
    ree, re, im = np.linalg.solve(A, b)
    return ree, complex(re, im)


def two_level(omega, delta=0.0, gamma=2.0, gamma_prime=0.0):
    return PhysicalParams(
        omega_R=omega, g_R=0, kappa=10, gamma=gamma, gamma_prime=gamma_prime, delta_xl=delta, phonons_enabled=False, fock_truncation=1
    )


def test_no_drive_gives_ground_state():
    p = PhysicalParams(omega_R=0, g_R=0, phonons_enabled=False, fock_truncation=3)
    sol = solve_point(p)
    ground = pure_density(basis_state(sol.space, GROUND, 0))
    np.testing.assert_allclose(sol.rho, ground, atol=1e-12)


@pytest.mark.parametrize("omega", [0.3, 0.8165, 2.0, 10.0])
def test_resonant_closed_form(omega):
    sol = solve_point(two_level(omega))
    ops = build_operators(sol.space)
    Om, g = u(omega), u(2.0)
    pop = (Om**2 / 4) / (Om**2 / 2 + g**2 / 4)
    coh2 = (Om**2 * g**2 / 16) / (Om**2 / 2 + g**2 / 4) ** 2
    assert expectation(sol.rho, ops.exciton_number).real == pytest.approx(pop, rel=1e-9)
    assert abs(expectation(sol.rho, ops.sigma_minus)) ** 2 == pytest.approx(coh2, rel=1e-9)


@given(st.floats(0.1, 20), st.floats(-20, 20), st.floats(0.5, 5), st.floats(0, 5))
def test_detuned_bloch_oracle(omega, delta, gamma, gamma_prime):
    sol = solve_point(two_level(omega, delta, gamma, gamma_prime))
    ops = build_operators(sol.space)
    ree, sm = bloch_oracle(u(omega), u(delta), u(gamma), u(gamma_prime))
    assert expectation(sol.rho, ops.exciton_number).real == pytest.approx(ree, abs=1e-10)
    assert abs(expectation(sol.rho, ops.sigma_minus) - sm) < 1e-10


def test_degenerate_steady_state_refused():
    p = PhysicalParams(omega_R=0, g_R=0, kappa=0, gamma=0, gamma_prime=0, phonons_enabled=False, fock_truncation=2)
    with pytest.raises(AmbiguousSteadyStateError):
        solve_point(p)


def test_evolve_trivial_cases(rng):
    p = PhysicalParams(fock_truncation=2, phonons_enabled=False)
    L = build_effective_liouvillian(p)
    rho0 = pure_density(basis_state(L.space, GROUND, 0))
    np.testing.assert_array_equal(evolve(L, rho0, 0.0, 1.0), rho0)
    zero = Superoperator(np.zeros_like(L.matrix), L.space)
    np.testing.assert_allclose(evolve(zero, rho0, 50.0, 0.7), rho0, atol=1e-15)
    with pytest.raises(InvalidParameterError):
        evolve(L, rho0, 1.0, 0.0)
    with pytest.raises(StepSizeError):
        evolve(L, rho0, 2000.0, 200.0)


def test_evolve_reaches_steady_state():
    p = PhysicalParams(omega_R=50, g_R=30, kappa=45, delta_xl=50, delta_cl=60, fock_truncation=4)
    L = build_effective_liouvillian(p)
    ss = steady_state(L)
    rho0 = pure_density(basis_state(L.space, GROUND, 0))
    rho_t = evolve(L, rho0, 20 / u(p.gamma), 0.5)
    assert trace_distance(rho_t, ss.rho) < 1e-5


def test_solution_diagnostics():
    sol = solve_point(PhysicalParams(fock_truncation=4))
    assert sol.residual < 1e-12 and sol.rcond > 1e-13
    assert sol.min_eigenvalue >= -1e-7
    np.testing.assert_allclose(sol.rho, sol.rho.conj().T, atol=0)
    assert np.trace(sol.rho).real == pytest.approx(1, abs=1e-14)


def test_convergence_without_cavity_coupling():
    p = PhysicalParams(g_R=0, fock_truncation=2)
    n, sol = converge_truncation(p)
    assert n == 2
    n, _ = converge_truncation(PhysicalParams(fock_truncation=4))
    assert n <= 16


def test_truncation_cap():
    with pytest.raises(ConvergenceError):
        converge_truncation(PhysicalParams(fock_truncation=4), cap=6)
    with pytest.raises(ConvergenceError):
        converge_truncation(PhysicalParams(fock_truncation=8), cap=4)


def test_converge_truncation_full_method():
    p = PhysicalParams(omega_R=60, g_R=40, kappa=54, fock_truncation=2)
    n, sol = converge_truncation(p, method="full")
    assert n >= 2 and sol.min_eigenvalue > -1e-7


def test_photon_number_decreases_with_kappa():
    base = PhysicalParams(omega_R=200, g_R=120, delta_xl=200, delta_cl=0.95 * 200 * np.sqrt(2), phonons_enabled=False, fock_truncation=4)
    photons = []
    for kappa in np.linspace(80, 400, 6):
        n, sol = converge_truncation(base.replace(kappa=float(kappa)))
        photons.append(expectation(sol.rho, build_operators(n).photon_number).real)
    assert np.all(np.diff(photons) < 0)


@given(
    st.floats(0, 300),
    st.floats(0, 150),
    st.floats(20, 300),
    st.floats(-1500, 1500),
    st.floats(-1500, 1500),
    st.floats(0, 10),
    st.booleans(),
)
def test_physical_bounds(omega, g, kappa, dxl, dcl, gp, phonons):
    p = PhysicalParams(omega_R=omega, g_R=g, kappa=kappa, delta_xl=dxl, delta_cl=dcl, gamma_prime=gp, phonons_enabled=phonons, fock_truncation=3)
    sol = solve_point(p)
    ops = build_operators(sol.space)
    pop = expectation(sol.rho, ops.exciton_number).real
    c2 = abs(expectation(sol.rho, ops.sigma_minus)) ** 2
    assert c2 <= pop * (1 - pop) + 1e-9
    assert -0.25 <= 2 * (pop - 2 * c2) <= 2
