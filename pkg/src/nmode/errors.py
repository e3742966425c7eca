"""Exception hierarchy for the nmode package."""


class NModeError(Exception):
    """Base class for all errors raised by nmode."""


class DomainError(NModeError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class ConvergenceError(NModeError):
    """An iterative method failed to reach its tolerance.

    ``state`` holds the last iterate and ``residual`` its residual norm, so
    callers can report how far off the solve ended.
    """

    def __init__(self, msg, state=None, residual=None):
        super().__init__(msg)
        self.state = state
        self.residual = residual


class SingularJacobianError(ConvergenceError):
    """The Newton matrix is numerically singular (likely near a bifurcation)."""


class StepUnderflowError(NModeError):
    """An adaptive step size fell below its lower bound."""
