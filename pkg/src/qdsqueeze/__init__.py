"""Polaron master-equation simulator of squeezed resonance fluorescence from a cavity-coupled quantum dot."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousSteadyStateError,
    ConfigError,
    ConvergenceError,
    InvalidParameterError,
    ModelViolationError,
    NumericalFailureError,
    PhysicalityError,
    QDSqueezeError,
    StepSizeError,
)
from .units import UNITS, PhononBathParams, PhysicalParams, rabi_to_power, validate_params, validity_metric  # noqa: E402
from .phonons import (  # noqa: E402
    IncoherentRates,
    PhononBathModel,
    bath_model,
    correlation_phi,
    half_fourier_kernel,
    incoherent_rates,
    mean_displacement,
    polaron_shift,
)
from .operators import SpaceDescriptor, build_operators, expectation  # noqa: E402
from .liouvillian import build_effective_liouvillian, build_full_generator, build_hamiltonian  # noqa: E402
from .steady import converge_truncation, evolve, steady_state  # noqa: E402
from .observables import SqueezingReport, min_variance, report, squeezing_db, variance_theta  # noqa: E402
from .sweep import ResultTable, SweepSpec, emit, figure_preset, read_table, run_sweep  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
