"""Exception hierarchy shared by all cmcindex modules."""


class CMCIndexError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(CMCIndexError, ValueError):
    """Invalid or inconsistent input parameters."""


class DegenerateChartError(CMCIndexError):
    """Chart point where the pullback metric degenerates (polar singularity)."""


class UnsupportedFamilyError(CMCIndexError):
    """The requested engine cannot handle this family."""


class ConvergenceError(CMCIndexError):
    """Iterative eigensolver failed to converge.

    ``best_residual`` carries the smallest residual observed, if any.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class InsufficientCountError(CMCIndexError):
    """Too few eigenvalues were enumerated to decide an index count."""


class InvariantViolation(CMCIndexError):
    """A mathematical invariant that must hold was observed to fail."""
