"""Exception types shared across the package."""


class DplrError(Exception):
    """Base class for all package errors."""


class InvalidInput(DplrError):
    """Malformed numerical input: wrong shape, non-finite entries, bad ranges."""


class InvalidRank(DplrError):
    """Rank parameter k outside 1..d (or 1..d-1 where a gap is required)."""


class DegenerateGap(DplrError):
    """An eigenvalue gap required to be positive is zero or negative."""


class InvalidPrivacyBudget(DplrError):
    """Privacy parameters outside epsilon > 0, 0 < delta < 1."""


class RowNormViolation(DplrError):
    """A data row exceeds unit Euclidean norm and clipping was not requested."""


class StiffnessFailure(DplrError):
    """Adaptive step-halving hit its floor with eigenvalue ordering still violated."""

    def __init__(self, time, indices, message=None):
        self.time = time
        self.indices = tuple(indices)
        if message is None:
            message = (
                f"step-size floor reached at t={time:.6g} with persistent "
                f"ordering violation at indices {self.indices}"
            )
        super().__init__(message)


class NoGaps(DplrError):
    """Gap statistics requested for a 1x1 matrix, which has no gaps."""


class InsufficientTailData(DplrError):
    """Too few samples fall inside the tail-fit window."""


class InvalidSpectrum(DplrError):
    """A spectrum family produced or received invalid (negative/unsorted) values."""


class DegenerateGapWarning(UserWarning):
    """Non-fatal: a truncation/projector was computed at a zero eigenvalue gap."""


class NonPsdWarning(UserWarning):
    """Non-fatal: input matrix failed the PSD tolerance in warn-only mode."""


class GapAssumptionWarning(UserWarning):
    """Non-fatal: the k-th eigenvalue gap is below the 4*sqrt(2*T*d) level
    the utility guarantee is calibrated for."""


class LargeSpectrumWarning(UserWarning):
    """Non-fatal: top eigenvalue exceeds the d**50 range the bounds assume."""
