"""Exception hierarchy.

Precondition failures (bad input, violated hypotheses) and numerical
failures (non-convergence, ill-conditioning) are kept apart so that the
command line can map them to distinct exit codes.
"""


class StekLabError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(StekLabError, ValueError):
    """An input violates the stated precondition of an operation."""


class NumericalError(StekLabError, ArithmeticError):
    """A numerical procedure failed to deliver its declared accuracy."""


class DimensionObstructionError(PreconditionError):
    """The closed-form coefficient vanishes in this dimension, so nothing can be recovered."""


class BranchViolationError(PreconditionError):
    """A phase lies outside the principal branch used by the linearized inversion."""


class AliasingError(PreconditionError):
    """Time grid too coarse for the largest eigenvalue."""


class TruncationMismatchError(PreconditionError):
    """Two spectra compared termwise were not truncated consistently."""


class OverlapError(PreconditionError):
    """Requested lengths are closer than the detector can separate."""


class DirichletEigenvalueError(NumericalError):
    """Zero is (numerically) a Dirichlet eigenvalue of the Schrodinger operator."""


class FundamentalDomainError(NumericalError):
    """Greedy reduction to the fundamental domain did not terminate."""


class RankDeficiencyError(NumericalError):
    """A least-squares problem is rank deficient and no regularization was given."""
