"""Squeezing figures of merit of the fluorescence field.

The positive-frequency field is taken proportional to σ- with unit
constant, so quadrature variances are in units where the vacuum level is ¼.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError
from .operators import OperatorSet, expectation

VACUUM_VARIANCE = 0.25


@dataclass(frozen=True)
class SqueezingReport:
    population: float
    coherence: complex
    coherence_sq: float
    variance_min: float
    theta_star: float
    squeezing_db: float
    photon_number: float

    @property
    def squeezed(self) -> bool:
        return self.variance_min < 0

    def as_dict(self) -> dict:
        d = asdict(self)
        c = d.pop("coherence")
        d["coherence_re"], d["coherence_im"] = c.real, c.imag
        return d


def variance_theta(rho, ops: OperatorSet, theta):
    """Normally ordered variance of E_θ = σ- e^{-iθ} + σ+ e^{iθ}.

    ⟨:ΔE_θ²:⟩ = 2⟨σ+σ-⟩ - 2|⟨σ-⟩|² - 2|⟨σ-⟩|² cos(2(θ - arg⟨σ-⟩)).
    """
    pop = expectation(rho, ops.exciton_number).real
    c = expectation(rho, ops.sigma_minus)
    c2 = abs(c) ** 2
    return 2 * (pop - c2) - 2 * c2 * np.cos(2 * (np.asarray(theta) - np.angle(c)))


def min_variance(rho, ops: OperatorSet) -> tuple[float, float]:
    """Minimum over θ of the normally ordered variance and the optimal phase.

    Returns ``(2[⟨σ+σ-⟩ - 2|⟨σ-⟩|²], θ*)`` with θ* = arg⟨σ-⟩ reduced to [0, π).
    """
    pop = expectation(rho, ops.exciton_number).real
    c = expectation(rho, ops.sigma_minus)
    theta = np.angle(c) % math.pi if abs(c) > 0 else 0.0
    return 2 * (pop - 2 * abs(c) ** 2), float(theta)


def squeezing_db(variance) -> float:
    """Noise reduction −10 log₁₀(1 + 4·variance) relative to the vacuum quadrature."""
    if not variance > -VACUUM_VARIANCE:
        raise InvalidParameterError(f"variance {variance} is at or below the physical bound -0.25", "variance")
    return -10 * math.log10(1 + variance / VACUUM_VARIANCE)


def report(rho, ops: OperatorSet) -> SqueezingReport:
    pop = expectation(rho, ops.exciton_number).real
    c = expectation(rho, ops.sigma_minus)
    var, theta = min_variance(rho, ops)
    return SqueezingReport(
        population=pop,
        coherence=c,
        coherence_sq=2 * abs(c) ** 2,
        variance_min=var,
        theta_star=theta,
        squeezing_db=squeezing_db(var),
        photon_number=expectation(rho, ops.photon_number).real,
    )
