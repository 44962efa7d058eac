"""Exception hierarchy shared by all solver modules."""


class ChooserError(Exception):
    """Base class for every error raised by amchooser."""


class RejectedParams(ChooserError, ValueError):
    """A market or numerics parameter violates a model constraint."""


class SingularSystem(ChooserError, ArithmeticError):
    """A tridiagonal pivot collapsed below the singularity floor."""


class NonConvergence(ChooserError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``history`` holds the residual (or increment) sequence observed before
    giving up, ``level`` the time level at which it happened.
    """

    def __init__(self, message, history=(), level=None):
        super().__init__(message)
        self.history = list(history)
        self.level = level


class IncommensurableGrids(ChooserError, ValueError):
    """Time offsets between surfaces are not whole numbers of steps."""


class NoCrossing(ChooserError, ValueError):
    """C(0, .) - P(0, .) has no sign change on the grid."""


class MultipleCrossings(ChooserError, ValueError):
    """C(0, .) - P(0, .) changes sign more than once on the grid."""


class OverlapDetected(ChooserError, RuntimeError):
    """A node passed both the put-side and the call-side contact test."""


class InvalidLattice(ChooserError, ValueError):
    """The binomial risk-neutral probability left (0, 1)."""


class IncommensurableHorizons(ChooserError, ValueError):
    """Lattice step does not divide every contract horizon."""
