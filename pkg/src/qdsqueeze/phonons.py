"""Acoustic-phonon bath: spectral density, polaron quantities and phonon-induced rates.

Frequencies are angular (rad/ps) and times are in ps throughout; ħ = 1 in
these units, so the bath temperature enters as k_B T / ħ.
"""

from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import InvalidParameterError, ModelViolationError, NumericalFailureError
from .units import UNITS, PhononBathParams, PhysicalParams

LOGGER = logging.getLogger(__name__)

#: upper frequency cutoff of every ω-integral, in units of ω_b
OMEGA_CUT_FACTOR = 8.0
B_RTOL = 1e-10
KERNEL_RTOL = 1e-8
TAU_MAX_DEFAULT = 20.0
TAU_STEP_DEFAULT = 0.01
TAU_MAX_CAP = 160.0
#: negative Re K below this magnitude is treated as round-off
RATE_CLAMP = 1e-12


def spectral_density(omega, params: PhononBathParams):
    """J(ω) = α ω³ exp(-ω²/2ω_b²) for ω ≥ 0 in rad/ps."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise InvalidParameterError("spectral density is defined for omega >= 0", "omega")
    wb = params.omega_b_angular
    out = params.alpha_p * omega**3 * np.exp(-(omega**2) / (2 * wb**2))
    return out if out.ndim else float(out)


def _omega_coth(omega, kT):
    """ω coth(ω / 2kT), continuous at ω = 0 (value 2kT) and at T = 0 (value ω)."""
    omega = np.asarray(omega, dtype=float)
    if kT <= 0:
        return omega.copy()
    x = omega / (2 * kT)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = np.where(small, 2 * kT * (1 + x**2 / 3), omega / np.tanh(safe))
    return out


def _quad(func, a, b, rtol, what, atol=0.0, **kw):
    """scipy quad with a hard failure when the error estimate misses tolerance."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, abserr = integrate.quad(func, a, b, epsabs=atol, epsrel=rtol, limit=2000, **kw)
    # quadpack error estimates are conservative; allow one order of slack
    if abserr > 10 * max(rtol * abs(value), atol, 1e-300):
        detail = f"; {caught[0].message}" if caught else ""
        raise NumericalFailureError(
            f"{what}: achieved abs error {abserr:.3g} for |value| = {abs(value):.3g} (rtol {rtol:g}){detail}"
        )
    return value, abserr


def _log_b_integral(params: PhononBathParams, temperature):
    """∫ J(ω)/ω² coth(ω/2kT) dω over (0, 8 ω_b]."""
    if params.alpha_p == 0:
        return 0.0
    wb = params.omega_b_angular
    kT = UNITS.thermal_angular(temperature)

    def integrand(w):
        return params.alpha_p * float(_omega_coth(w, kT)) * math.exp(-(w * w) / (2 * wb * wb))

    value, _ = _quad(integrand, 0.0, OMEGA_CUT_FACTOR * wb, B_RTOL, "mean displacement")
    return value


def mean_displacement(params: PhononBathParams, temperature) -> float:
    """Thermal mean phonon displacement ⟨B⟩ = exp(-½ ∫ J/ω² coth(ω/2kT) dω)."""
    if temperature < 0:
        raise InvalidParameterError("temperature must be >= 0", "temperature")
    return math.exp(-0.5 * _log_b_integral(params, temperature))


def polaron_shift(params: PhononBathParams) -> float:
    """Polaron shift Δ_P = ∫ J(ω)/ω dω, returned in μeV."""
    if params.alpha_p == 0:
        return 0.0
    wb = params.omega_b_angular

    def integrand(w):
        return params.alpha_p * w * w * math.exp(-(w * w) / (2 * wb * wb))

    value, _ = _quad(integrand, 0.0, OMEGA_CUT_FACTOR * wb, B_RTOL, "polaron shift")
    return UNITS.angular_to_ueV(value)


def _gauss_legendre_grid(upper, tau_max, phase_per_panel=1.5, order=16):
    n_panels = max(32, int(math.ceil(upper * tau_max / phase_per_panel)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, upper, n_panels + 1)
    half = np.diff(edges)[:, None] / 2
    mid = (edges[:-1] + edges[1:])[:, None] / 2
    return (mid + half * x).ravel(), (half * w).ravel()


def _phi_on_grid(params: PhononBathParams, temperature, tau):
    """φ(τ) on an array of τ by composite Gauss-Legendre quadrature in ω."""
    wb = params.omega_b_angular
    kT = UNITS.thermal_angular(temperature)
    nodes, weights = _gauss_legendre_grid(OMEGA_CUT_FACTOR * wb, float(np.max(tau)) if len(tau) else 0.0)
    gauss = params.alpha_p * np.exp(-(nodes**2) / (2 * wb**2))
    re_w = weights * gauss * _omega_coth(nodes, kT)
    im_w = weights * gauss * nodes
    phase = np.outer(tau, nodes)
    return np.cos(phase) @ re_w - 1j * (np.sin(phase) @ im_w)


def _exp_moments(z, order=3):
    """E_m(z) = ∫₀¹ uᵐ e^{zu} du for m = 0..order, elementwise in complex z."""
    z = np.asarray(z, dtype=complex)
    out = np.empty((order + 1,) + z.shape, dtype=complex)
    small = np.abs(z) <= 1.0
    zs = np.where(small, z, 0.0)
    # power series, 30 terms is exact to double precision for |z| <= 1
    term = np.ones_like(zs)
    series = np.zeros_like(out)
    for n in range(30):
        if n:
            term = term * zs / n
        for m in range(order + 1):
            series[m] += term / (n + m + 1)
    zl = np.where(small, 1.0, z)
    ez = np.exp(zl)
    rec = (ez - 1) / zl
    out[0] = np.where(small, series[0], rec)
    for m in range(1, order + 1):
        rec = (ez - m * rec) / zl
        out[m] = np.where(small, series[m], rec)
    return out


def spline_fourier(spline: CubicSpline, omegas, sign=+1):
    """Exact ∫ S(τ) e^{±iωτ} dτ over the knot range of a cubic spline S.

    The spline must have uniformly spaced knots.  Evaluated for every
    frequency in ``omegas`` at once.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float)) * sign
    x = spline.x
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise InvalidParameterError("spline_fourier requires uniformly spaced knots")
    coeffs = spline.c  # highest power first, shape (4, n_intervals)
    moments = _exp_moments(1j * omegas * h)  # (4, n_omega)
    phase = np.exp(1j * np.outer(omegas, x[:-1]))  # (n_omega, n_intervals)
    total = np.zeros(omegas.shape, dtype=complex)
    for power in range(4):
        c = coeffs[3 - power]
        total += h ** (power + 1) * moments[power] * (phase @ c)
    return total


@dataclass(frozen=True, eq=False)
class PhononBathModel:
    """Phonon bath at fixed temperature with cached polaron quantities.

    Build with :meth:`build`; the correlation function φ(τ) is tabulated
    on a uniform τ grid and interpolated with cubic splines.
    """

    params: PhononBathParams
    temperature: float
    B: float
    delta_P: float
    tau: np.ndarray = field(repr=False)
    phi_table: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, params: PhononBathParams, temperature, tau_max=TAU_MAX_DEFAULT, tau_step=TAU_STEP_DEFAULT):
        if temperature < 0:
            raise InvalidParameterError("temperature must be >= 0", "temperature")
        B = mean_displacement(params, temperature)
        delta_P = polaron_shift(params)
        while True:
            n = int(round(tau_max / tau_step))
            tau = np.linspace(0.0, n * tau_step, n + 1)
            phi = _phi_on_grid(params, temperature, tau)
            f = np.abs(np.expm1(phi))
            scale = f[0]
            tail = f[int(0.9 * n):].max() if n else 0.0
            if scale == 0 or tail < 1e-8 * scale:
                break
            if 2 * tau_max > TAU_MAX_CAP:
                LOGGER.warning(
                    "phonon correlation tail |e^phi - 1| = %.3g at tau_max = %g ps (T = %g K)",
                    tail, tau_max, temperature,
                )
                break
            tau_max *= 2
        tau.setflags(write=False)
        phi.setflags(write=False)
        return cls(params, float(temperature), B, delta_P, tau, phi)

    @property
    def tau_max(self) -> float:
        return float(self.tau[-1])

    @functools.cached_property
    def _phi_splines(self):
        return CubicSpline(self.tau, self.phi_table.real), CubicSpline(self.tau, self.phi_table.imag)

    @functools.cached_property
    def _kernel_splines(self):
        f = np.expm1(self.phi_table)
        return CubicSpline(self.tau, f.real), CubicSpline(self.tau, f.imag)

    @functools.cached_property
    def kernel_scale(self) -> float:
        """∫|e^φ - 1| dτ, the absolute scale for kernel tolerances (ps)."""
        return float(integrate.trapezoid(np.abs(np.expm1(self.phi_table)), self.tau))

    @functools.cached_property
    def _kernel_spline_complex(self):
        return CubicSpline(self.tau, np.expm1(self.phi_table))

    @functools.cached_property
    def green_splines(self):
        """Complex cubic splines of (G_g, G_u) on the τ table."""
        b2 = self.B**2
        phi = self.phi_table
        return CubicSpline(self.tau, b2 * (np.cosh(phi) - 1)), CubicSpline(self.tau, b2 * np.sinh(phi))


@functools.lru_cache(maxsize=64)
def bath_model(params: PhononBathParams, temperature) -> PhononBathModel:
    """Cached :meth:`PhononBathModel.build` with default τ grid."""
    return PhononBathModel.build(params, float(temperature))


def correlation_phi(tau, model: PhononBathModel, direct=False):
    """Phonon correlation function φ(τ) for τ ≥ 0 (dimensionless, complex).

    Interpolated from the model table; ``direct=True`` (or τ beyond the
    table) evaluates the ω-integral by adaptive oscillatory quadrature.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise InvalidParameterError("tau must be >= 0", "tau")
    if model.params.alpha_p == 0:
        out = np.zeros(tau_arr.shape, dtype=complex)
        return out if out.ndim else complex(out)
    if not direct and np.all(tau_arr <= model.tau_max):
        re, im = model._phi_splines
        out = re(tau_arr) + 1j * im(tau_arr)
        return out if out.ndim else complex(out)
    out = np.array([_phi_direct(float(t), model.params, model.temperature) for t in tau_arr.ravel()])
    out = out.reshape(tau_arr.shape)
    return out if out.ndim else complex(out)


def _phi_direct(tau, params: PhononBathParams, temperature, rtol=1e-11):
    wb = params.omega_b_angular
    kT = UNITS.thermal_angular(temperature)
    upper = OMEGA_CUT_FACTOR * wb

    def re_f(w):
        return params.alpha_p * float(_omega_coth(w, kT)) * math.exp(-(w * w) / (2 * wb * wb))

    def im_f(w):
        return params.alpha_p * w * math.exp(-(w * w) / (2 * wb * wb))

    # absolute floor on the natural scale α ω_b² of φ, which decays to zero at long τ
    atol = rtol * params.alpha_p * wb * wb
    if tau == 0:
        re, _ = _quad(re_f, 0.0, upper, rtol, "phi(0)", atol)
        return complex(re, 0.0)
    re, _ = _quad(re_f, 0.0, upper, rtol, "Re phi", atol, weight="cos", wvar=tau)
    im, _ = _quad(im_f, 0.0, upper, rtol, "Im phi", atol, weight="sin", wvar=tau)
    return complex(re, -im)


def green_functions(tau, model: PhononBathModel):
    """Polaron Green functions G_g = B²(cosh φ - 1) and G_u = B² sinh φ."""
    phi = correlation_phi(tau, model)
    b2 = model.B**2
    return b2 * (np.cosh(phi) - 1), b2 * np.sinh(phi)


def half_fourier_kernel(Delta, model: PhononBathModel, method="adaptive", rtol=KERNEL_RTOL, with_error=False):
    """K(Δ) = ∫₀^{τ_max} e^{iΔτ} (e^{φ(τ)} - 1) dτ in ps.

    ``method="adaptive"`` uses QAWO-weighted adaptive quadrature of the
    tabulated e^φ - 1; ``method="spline"`` integrates the same cubic
    interpolant against the exponential exactly.
    """
    if model.params.alpha_p == 0:
        return (0j, 0.0) if with_error else 0j
    if method == "spline":
        value = complex(spline_fourier(model._kernel_spline_complex, [Delta])[0])
        return (value, 0.0) if with_error else value
    if method != "adaptive":
        raise InvalidParameterError(f"unknown kernel method {method!r}", "method")
    sr, si = model._kernel_splines
    T = model.tau_max
    atol = rtol * model.kernel_scale
    what = f"half-Fourier kernel at Delta={Delta:.6g} rad/ps"
    if Delta == 0:
        re, e1 = _quad(sr, 0.0, T, rtol, what, atol)
        im, e2 = _quad(si, 0.0, T, rtol, what, atol)
        value, err = complex(re, im), e1 + e2
    else:
        cr, e1 = _quad(sr, 0.0, T, rtol, what, atol, weight="cos", wvar=Delta)
        sr_, e2 = _quad(sr, 0.0, T, rtol, what, atol, weight="sin", wvar=Delta)
        ci, e3 = _quad(si, 0.0, T, rtol, what, atol, weight="cos", wvar=Delta)
        si_, e4 = _quad(si, 0.0, T, rtol, what, atol, weight="sin", wvar=Delta)
        value, err = complex(cr - si_, sr_ + ci), e1 + e2 + e3 + e4
    return (value, err) if with_error else value


def _rate_kernel(Delta, model, method):
    value, err = half_fourier_kernel(Delta, model, method=method, with_error=True)
    re = value.real
    if re < 0:
        if re < -(RATE_CLAMP + 10 * err):
            raise ModelViolationError(
                f"Re K({Delta:.6g}) = {re:.3g} is negative beyond quadrature error {err:.3g}"
            )
        re = 0.0
    return re


@dataclass(frozen=True)
class IncoherentRates:
    """Phonon-induced Lindblad rates in rad/ps."""

    gamma_sigma_plus: float = 0.0
    gamma_sigma_minus: float = 0.0
    gamma_sigma_plus_a: float = 0.0
    gamma_a_dag_sigma_minus: float = 0.0

    def as_tuple(self):
        return (self.gamma_sigma_plus, self.gamma_sigma_minus, self.gamma_sigma_plus_a, self.gamma_a_dag_sigma_minus)


def incoherent_rates(p: PhysicalParams, model: PhononBathModel | None = None, method="adaptive") -> IncoherentRates:
    """The four phonon-induced incoherent rates of the effective master equation.

    Γ^{σ+} = (Ω_R²/2) Re K(-Δ̃_xl), Γ^{σ-} = (Ω_R²/2) Re K(Δ̃_xl),
    Γ^{σ+a} = 2 g_R² Re K(Δ_cx), Γ^{a†σ-} = 2 g_R² Re K(-Δ_cx).
    """
    if not p.phonons_enabled or p.bath.alpha_p == 0:
        return IncoherentRates()
    if model is None:
        model = bath_model(p.bath, p.temperature)
    u = UNITS.ueV_to_angular
    omega, g = u(p.omega_R), u(p.g_R)
    dxl, dcx = u(p.delta_xl), u(p.delta_cx)
    sp = sm = spa = ads = 0.0
    if omega > 0:
        sp = 0.5 * omega**2 * _rate_kernel(-dxl, model, method)
        sm = 0.5 * omega**2 * _rate_kernel(dxl, model, method)
    if g > 0:
        spa = 2 * g**2 * _rate_kernel(dcx, model, method)
        ads = 2 * g**2 * _rate_kernel(-dcx, model, method)
    return IncoherentRates(sp, sm, spa, ads)
