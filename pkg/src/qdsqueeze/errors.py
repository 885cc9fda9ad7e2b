"""Exception hierarchy shared by every module in the package."""


class QDSqueezeError(Exception):
    """Base class for all errors raised by ``qdsqueeze``."""


class InvalidParameterError(QDSqueezeError, ValueError):
    """A physical parameter or argument violates its documented invariant."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigError(InvalidParameterError):
    """A configuration document is malformed or has unknown keys."""


class NumericalFailureError(QDSqueezeError, RuntimeError):
    """A quadrature, linear solve or integrator did not reach its tolerance."""


class ModelViolationError(NumericalFailureError):
    """A computed quantity is outside the range the model allows (e.g. a negative rate)."""


class AmbiguousSteadyStateError(NumericalFailureError):
    """The generator has more than one stationary state."""


class PhysicalityError(NumericalFailureError):
    """A computed density matrix is not positive semidefinite within tolerance."""


class StepSizeError(NumericalFailureError):
    """The fixed-step propagator is unstable for the requested step."""


class ConvergenceError(NumericalFailureError):
    """Fock-space truncation did not converge below the hard cap."""
