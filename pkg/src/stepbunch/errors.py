"""Exception types raised across the package."""


class StepBunchError(Exception):
    """Base class for all package errors."""


class DomainError(StepBunchError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(StepBunchError, ValueError):
    """Inconsistent sizes, missing inputs or invalid options."""


class SingularityError(DomainError):
    """Evaluation requested at a singular point (pole, kernel origin)."""


class InfeasibleError(DomainError):
    """A density is negative where nonnegativity is required."""


class AnsatzError(DomainError):
    """The bunch ansatz is not defined for the requested parameters."""


class DivergenceError(DomainError):
    """A lattice sum diverges for the requested exponent."""


class ResolutionError(DomainError):
    """The grid is too coarse to resolve the requested bunch."""


class NumericalFailure(StepBunchError, RuntimeError):
    """A computation produced non-finite values or failed to converge.

    ``payload`` carries whatever state is useful for a post-mortem
    (typically the offending iterate).
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class TopologyError(NumericalFailure):
    """Two steps crossed during step dynamics."""

    def __init__(self, message, time=None, payload=None):
        super().__init__(message, payload)
        self.time = time


class DegenerateSlopeError(NumericalFailure):
    """The continuum density touched zero during evolution."""

    def __init__(self, message, time=None, payload=None):
        super().__init__(message, payload)
        self.time = time


class SurfaceInversionError(NumericalFailure):
    """Newton inversion of a test surface did not converge."""
