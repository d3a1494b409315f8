"""Exception hierarchy shared by all homctl modules.

The CLI maps :class:`HomctlError` subclasses to exit code 2 (domain failure)
and everything else to generic failures, so library code should raise one of
these for any violation of a documented precondition or invariant.
"""


class HomctlError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionError(HomctlError):
    """Matrix/vector shapes are incompatible with the requested operation."""


class NotPositiveDefiniteError(HomctlError):
    """A matrix required to be positive definite is not.

    Carries the offending minimal eigenvalue in :attr:`min_eigenvalue`.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NonMonotoneDilationError(HomctlError):
    """The dilation is not monotone w.r.t. the weighted norm, so the
    homogeneous norm is not well defined."""


class ControllabilityError(HomctlError):
    """The pair {A, B} fails the controllability rank test."""


class SynthesisError(HomctlError):
    """Controller synthesis failed (inconsistent linear system, parameter
    out of the admissible range, or a violated design invariant)."""


class LmiInfeasibleError(SynthesisError):
    """The gain equation solver did not reach a feasible point within its
    iteration budget.  Carries the last residuals for diagnosis."""

    def __init__(self, message, iterations=None, equality_residual=None,
                 x_margin=None, w_margin=None):
        super().__init__(message)
        self.iterations = iterations
        self.equality_residual = equality_residual
        self.x_margin = x_margin
        self.w_margin = w_margin


class SchemeError(HomctlError):
    """A sampled-data scheme could not be built (singular step matrix,
    invalid step size, or a plant outside the supported class)."""


class StructureError(HomctlError):
    """A multi-input plant does not have the required block-triangular
    cascade structure."""


class ConfigError(HomctlError):
    """A configuration document is syntactically valid but semantically
    unusable (missing keys, bad dimensions, unknown scheme, ...)."""
