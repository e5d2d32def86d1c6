"""Exception hierarchy.

Parameter problems raise ``ValueError`` (usually via
:func:`sklearn.utils.check_scalar`); numerical failures raise a subclass of
:class:`NumericalError` so callers, including the CLI, can tell the two apart.
"""


class GiverSchemeError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(GiverSchemeError):
    """A computation ran but could not produce a trustworthy result."""


class NonConvergedError(NumericalError):
    """Fixed-point iteration exhausted its iteration budget.

    ``residual_profile`` holds the last successive change at every grid node.
    """

    def __init__(self, message, residual_profile=None, iterations=None):
        super().__init__(message)
        self.residual_profile = residual_profile
        self.iterations = iterations


class DivisionGuardError(NumericalError):
    """The iteration denominator ``2 - g(fz)`` came too close to zero."""


class GridOverflowError(NumericalError):
    """An invariant grid would exceed the configured node cap."""


class OffRayError(GiverSchemeError, ValueError):
    """A query point does not lie on the ray a grid was solved along."""


class OutOfRangeError(GiverSchemeError, ValueError):
    """A query point lies beyond the solved extent of a grid."""


class WindowTooSmallError(GiverSchemeError, ValueError):
    """A fit window contains too few grid nodes."""


class EvalDomainError(NumericalError):
    """A transform evaluator rejected an inversion node."""


class UntrustedMassError(NumericalError):
    """Too much probability mass lies below the trust floor."""


class SupportMismatchError(GiverSchemeError, ValueError):
    """A density is positive where the reference density vanishes."""


class TailDominatedError(NumericalError):
    """Truncation corrections are larger than the requested tolerance."""


class InsufficientRangeError(GiverSchemeError, ValueError):
    """Not enough trusted decades to analyse log-periodic structure."""
