"""Physical constants, parameter containers and regime checks.

All user-facing energies are given in μeV (bath cutoff in meV, coupling
strength in ps²).  Internally every frequency is an angular frequency in
rad/ps, obtained by dividing the energy by ħ in meV·ps.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple

import scipy.constants as sc

from .errors import ConfigError, InvalidParameterError

LOGGER = logging.getLogger(__name__)

HBAR_MEV_PS = 0.6582119569
KB_MEV_PER_K = 0.08617333
#: phonon correlation time used by the regime checks
TAU_PH_PS = 2.0


@dataclass(frozen=True)
class UnitSystem:
    """Energy ↔ angular-frequency conversion at fixed ħ and k_B."""

    hbar: float = HBAR_MEV_PS
    k_B: float = KB_MEV_PER_K

    def to_angular(self, energy_mev):
        """meV → rad/ps."""
        return energy_mev / self.hbar

    def from_angular(self, omega):
        """rad/ps → meV."""
        return omega * self.hbar

    def ueV_to_angular(self, energy_uev):
        return energy_uev * 1e-3 / self.hbar

    def angular_to_ueV(self, omega):
        return omega * self.hbar * 1e3

    def thermal_angular(self, temperature):
        """k_B T / ħ in rad/ps."""
        return self.k_B * temperature / self.hbar


UNITS = UnitSystem()


@dataclass(frozen=True)
class PhononBathParams:
    """Super-Ohmic spectral density α ω³ exp(-ω²/2ω_b²).

    ``alpha_p`` is in ps² and multiplies angular frequencies in rad/ps;
    ``omega_b`` is the cutoff energy in meV.
    """

    alpha_p: float = 0.06
    omega_b: float = 1.0

    def __post_init__(self):
        if not self.alpha_p >= 0:
            raise InvalidParameterError(f"alpha_p must be >= 0, got {self.alpha_p}", "alpha_p")
        if not self.omega_b > 0:
            raise InvalidParameterError(f"omega_b must be > 0, got {self.omega_b}", "omega_b")

    @property
    def omega_b_angular(self) -> float:
        return UNITS.to_angular(self.omega_b)


_NONNEGATIVE = ("omega_R", "g_R", "kappa", "gamma", "gamma_prime", "temperature")


@dataclass(frozen=True)
class PhysicalParams:
    """One operating point of the driven dot-cavity system.

    Couplings are the phonon-renormalized values Ω_R and g_R, and
    ``delta_xl`` already contains the polaron shift.  Energies in μeV,
    temperature in K.
    """

    omega_R: float = 200.0
    g_R: float = 120.0
    kappa: float = 180.0
    gamma: float = 2.0
    gamma_prime: float = 0.5
    delta_xl: float = 200.0
    delta_cl: float = 0.0
    temperature: float = 4.0
    phonons_enabled: bool = True
    fock_truncation: int = 10
    bath: PhononBathParams = field(default_factory=PhononBathParams)

    def __post_init__(self):
        for name in _NONNEGATIVE:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value >= 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be a finite number >= 0, got {value!r}", name)
        for name in ("delta_xl", "delta_cl"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite", name)
        if int(self.fock_truncation) != self.fock_truncation or self.fock_truncation < 1:
            raise InvalidParameterError(
                f"fock_truncation must be an integer >= 1, got {self.fock_truncation!r}",
                "fock_truncation",
            )
        if not isinstance(self.bath, PhononBathParams):
            raise InvalidParameterError("bath must be a PhononBathParams", "bath")

    @property
    def delta_cx(self) -> float:
        """Cavity-exciton detuning ω_c - ω_x in μeV."""
        return self.delta_cl - self.delta_xl

    @property
    def generalized_rabi(self) -> float:
        """√(Ω_R² + Δ̃_xl²) in μeV, the natural detuning scale of the figures."""
        return math.hypot(self.omega_R, self.delta_xl)

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)


class ValidityCheck(NamedTuple):
    metric: float
    timescale_ps: float


def validity_metric(omega_R, bath: PhononBathParams, B) -> ValidityCheck:
    """Polaron-theory validity measure (Ω/ω_b)²(1 - B⁴) and the period 2πħ/Ω.

    The measure is evaluated with the bare Rabi frequency Ω = Ω_R / B.

    Parameters
    ----------
    omega_R : float
        Renormalized Rabi frequency in μeV.
    bath : PhononBathParams
    B : float
        Mean phonon displacement, in (0, 1].
    """
    if not 0 < B <= 1:
        raise InvalidParameterError(f"B must lie in (0, 1], got {B}", "B")
    omega_bare = omega_R / B * 1e-3  # meV
    metric = (omega_bare / bath.omega_b) ** 2 * (1 - B**4)
    timescale = 2 * math.pi * HBAR_MEV_PS / omega_bare if omega_bare > 0 else math.inf
    return ValidityCheck(metric, timescale)


class LaserPower(NamedTuple):
    field_V_per_m: float
    intensity_W_per_m2: float
    power_W: float


def rabi_to_power(omega, dipole_moment, spot_area) -> LaserPower:
    """Laser field, intensity and power needed for a Rabi energy.

    E = ħΩ/p, I = ½ c ε₀ E², P = I·A.

    Parameters
    ----------
    omega : float
        Rabi energy ħΩ in μeV (zero gives zero power).
    dipole_moment : float
        Transition dipole moment in C·m.
    spot_area : float
        Beam spot area in m².
    """
    if not omega >= 0:
        raise InvalidParameterError(f"omega must be >= 0, got {omega}", "omega")
    if not dipole_moment > 0:
        raise InvalidParameterError(f"dipole_moment must be > 0, got {dipole_moment}", "dipole_moment")
    if not spot_area > 0:
        raise InvalidParameterError(f"spot_area must be > 0, got {spot_area}", "spot_area")
    energy_J = omega * 1e-6 * sc.e
    e_field = energy_J / dipole_moment
    intensity = 0.5 * sc.c * sc.epsilon_0 * e_field**2
    return LaserPower(e_field, intensity, intensity * spot_area)


def validate_params(p: PhysicalParams) -> list[str]:
    """Re-check invariants and return regime warnings (possibly empty).

    Invariant violations raise :class:`InvalidParameterError` naming the
    offending field.  Warnings flag points where the effective polaron
    master equation is not expected to hold.
    """
    # dataclasses.replace re-runs __post_init__, so this re-validates after mutation
    dataclasses.replace(p)
    warnings: list[str] = []
    if not p.phonons_enabled or p.omega_R == 0:
        return warnings
    from .phonons import mean_displacement

    B = mean_displacement(p.bath, p.temperature)
    check = validity_metric(p.omega_R, p.bath, B)
    if check.metric > 0.05:
        warnings.append(
            f"(Omega/omega_b)^2 (1 - B^4) = {check.metric:.3g} exceeds 0.05; polaron theory may be inaccurate"
        )
    period = 2 * math.pi * HBAR_MEV_PS / (p.omega_R * 1e-3)
    if period < 5 * TAU_PH_PS:
        warnings.append(
            f"2*pi*hbar/Omega_R = {period:.3g} ps is below 5 tau_ph; effective rates may be inaccurate"
        )
    for w in warnings:
        LOGGER.warning(w)
    return warnings


# --- configuration schema -------------------------------------------------

CONFIG_KEYS = {
    "omega_R_ueV": "omega_R",
    "g_R_ueV": "g_R",
    "kappa_ueV": "kappa",
    "gamma_ueV": "gamma",
    "gamma_prime_ueV": "gamma_prime",
    "delta_xl_ueV": "delta_xl",
    "delta_cl_ueV": "delta_cl",
    "temperature_K": "temperature",
    "phonons_enabled": "phonons_enabled",
    "fock_truncation": "fock_truncation",
}
BATH_KEYS = {"alpha_p_ps2": "alpha_p", "omega_b_meV": "omega_b"}
FIELD_TO_KEY = {v: k for k, v in CONFIG_KEYS.items()} | {v: k for k, v in BATH_KEYS.items()}


def params_from_config(cfg: Mapping[str, Any], base: PhysicalParams | None = None) -> PhysicalParams:
    """Build :class:`PhysicalParams` from the explicit-unit JSON schema.

    Unknown keys raise :class:`ConfigError`; missing keys keep the value
    from ``base`` (package defaults when ``base`` is None).
    """
    base = base or PhysicalParams()
    unknown = sorted(set(cfg) - set(CONFIG_KEYS) - set(BATH_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}", unknown[0])
    kwargs: dict[str, Any] = {}
    for key, name in CONFIG_KEYS.items():
        if key in cfg:
            value = cfg[key]
            if name == "phonons_enabled":
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be a boolean", key)
            elif name == "fock_truncation":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} must be an integer", key)
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number", key)
            kwargs[name] = value
    bath_kwargs = {}
    for key, name in BATH_KEYS.items():
        if key in cfg:
            value = cfg[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number", key)
            bath_kwargs[name] = float(value)
    try:
        if bath_kwargs:
            kwargs["bath"] = dataclasses.replace(base.bath, **bath_kwargs)
        return dataclasses.replace(base, **kwargs)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), exc.field) from exc


def params_to_config(p: PhysicalParams) -> dict[str, Any]:
    out = {key: getattr(p, name) for key, name in CONFIG_KEYS.items()}
    out.update({key: getattr(p.bath, name) for key, name in BATH_KEYS.items()})
    return out


def set_param(p: PhysicalParams, name: str, value) -> PhysicalParams:
    """Return ``p`` with one field replaced; ``name`` may be a field or config key."""
    name = CONFIG_KEYS.get(name, BATH_KEYS.get(name, name))
    if name in ("alpha_p", "omega_b"):
        return dataclasses.replace(p, bath=dataclasses.replace(p.bath, **{name: float(value)}))
    if name == "fock_truncation":
        value = int(value)
    elif name == "phonons_enabled":
        value = bool(value)
    elif name not in CONFIG_KEYS.values():
        raise InvalidParameterError(f"unknown parameter {name!r}", name)
    else:
        value = float(value)
    return dataclasses.replace(p, **{name: value})


def get_param(p: PhysicalParams, name: str):
    name = CONFIG_KEYS.get(name, BATH_KEYS.get(name, name))
    if name in ("alpha_p", "omega_b"):
        return getattr(p.bath, name)
    if name == "delta_cx":
        return p.delta_cx
    if name == "generalized_rabi":
        return p.generalized_rabi
    return getattr(p, name)
