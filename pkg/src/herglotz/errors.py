"""Exception taxonomy shared by all modules."""

from __future__ import annotations


class HerglotzError(Exception):
    """Base class for all library errors."""


class ValidationError(HerglotzError):
    """Input violates a documented precondition."""


class AliasingError(ValidationError):
    """Grid too small for the requested Fourier index range."""


class PoleError(HerglotzError):
    """Evaluation at (or too close to) a denominator root."""


class CayleySingularError(HerglotzError):
    """I + F is singular within tolerance, Cayley transform undefined."""


class NotSchurError(ValidationError):
    """Candidate function is not bounded by one on the disc."""


class NotHerglotzError(ValidationError):
    """Real part drops below tolerance on the sample set.

    ``witness`` holds a (point, value) pair exhibiting the violation.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class InfeasibleError(HerglotzError):
    """Constrained solve has no nonnegative solution within tolerance.

    ``residual`` is the best equality residual reached.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class TruncationError(HerglotzError):
    """Series truncation tail bound exceeds the accuracy target."""


class GramConditionError(HerglotzError):
    """Gram matrix too ill-conditioned for the requested truncation."""


class MonteCarloError(HerglotzError):
    """Monte Carlo moment estimate did not converge to the target stderr."""


class UsageError(HerglotzError):
    """Malformed command line or input file."""
