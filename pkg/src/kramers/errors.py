"""Exception hierarchy shared across the package."""


class KramersError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(KramersError, ValueError):
    """An argument lies outside the domain of the operation."""


class StructureError(KramersError, ValueError):
    """An object lacks the structure an operation relies on (inertia, critical points)."""


class MatrixOverflowError(KramersError, OverflowError):
    """Scaling and squaring left the representable floating point range."""


class AdmissibilityError(KramersError, ValueError):
    """A parameter violates one of the admissibility thresholds.

    The ``component`` attribute names the violated threshold.
    """

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class DivergenceError(KramersError, RuntimeError):
    """A sampler left the divergence guard or produced a non-finite gradient."""


class AllTimeoutError(KramersError, RuntimeError):
    """Every path of a Monte Carlo batch hit the step limit."""


class CoverageError(KramersError, ValueError):
    """A trajectory is too short for the requested classification window."""


class ConfigError(KramersError, ValueError):
    """An experiment configuration failed validation."""
