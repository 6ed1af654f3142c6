"""Exception types shared across the package."""


class AnisoShiftError(Exception):
    """Base class for all package errors."""


class InsufficientResolutionError(AnisoShiftError):
    """A sequence or field was too shallow to resolve the requested quantity."""


class DepthExhaustedError(AnisoShiftError):
    """A composition would push a step field below depth zero."""


class WindowUnderflowError(AnisoShiftError):
    """A bilateral point ran out of symbols and no extension policy can supply more."""


class DegenerateMassError(AnisoShiftError):
    """A cylinder carries zero (or unit) reference mass, so the grid axioms fail."""


class NonConvergenceError(AnisoShiftError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""


class BudgetExhaustedError(AnisoShiftError):
    """A resolution budget would be violated; never truncate silently.

    ``result`` optionally carries partial output (e.g. the last iterate of a
    fixed-point run) so callers can inspect how far the computation got.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConstraintViolationError(AnisoShiftError):
    """An exponent or configuration constraint was violated; named in the message."""
