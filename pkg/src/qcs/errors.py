"""Exception types shared across the package."""


class QcsError(Exception):
    """Base class for all package-specific errors."""


class LengthMismatch(QcsError):
    """Two quaternion vectors that must share a length do not."""


class DimMismatch(QcsError):
    """Matrix/vector dimensions are inconsistent."""


class SOutOfRange(QcsError):
    """A sparsity level falls outside its admissible range."""


class InvalidDims(QcsError):
    """Requested matrix dimensions are not admissible."""


class TooManySupports(QcsError):
    """Exact brute-force enumeration would exceed the support cap."""


class ZeroColumn(QcsError):
    """Column-normalized quantity requested for a matrix with a zero column."""


class NegativeEta(QcsError):
    """Noise radius must be nonnegative."""


class DeltaOutOfRange(QcsError):
    """Isometry constant outside [0, 1/3); the recovery guarantee does not apply."""


class DegenerateDenominator(QcsError):
    """Tail l1 norm too small to divide by; the ratio is undefined at this sparsity."""


class LayoutMismatch(QcsError):
    """Solution vector length does not match any known variable layout."""


class RankDeficient(QcsError):
    """Equality constraints are linearly dependent beyond what presolve removes."""


class FormatError(QcsError):
    """A data file does not conform to its declared format."""


class SolverFailure(QcsError):
    """The cone solver terminated without an optimal point."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class InfeasibleProblem(SolverFailure):
    """The constraints admit no feasible point."""
