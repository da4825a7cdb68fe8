"""Real measurement matrices and restricted-isometry estimation.

Matrices are plain ``(m, n)`` float64 arrays.  Isometry constants come in
three flavours: exact brute force over all supports, a randomized lower
bound for sizes where enumeration is infeasible, and the column coherence
as a cheap cross-check for unit-norm columns at sparsity 2.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DimMismatch,
    FormatError,
    InvalidDims,
    SOutOfRange,
    TooManySupports,
    ZeroColumn,
)
from .quat import QVector
from .rng import Xoshiro256StarStar

__all__ = [
    "RipEstimate",
    "EXACT_BRUTE_FORCE",
    "RANDOMIZED_LOWER_BOUND",
    "COHERENCE_UPPER_BOUND",
    "gaussian_matrix",
    "partial_orthogonal_matrix",
    "apply",
    "rip_constant_exact",
    "rip_constant_lower_bound",
    "coherence",
    "read_matrix",
    "write_matrix",
]

EXACT_BRUTE_FORCE = "ExactBruteForce"
RANDOMIZED_LOWER_BOUND = "RandomizedLowerBound"
COHERENCE_UPPER_BOUND = "CoherenceUpperBound"

DEFAULT_SUPPORT_CAP = 1_000_000


@dataclass(frozen=True)
class RipEstimate:
    """An estimate of the restricted isometry constant delta_s."""

    s: int
    value: float
    method: str
    trials: int = 0


def gaussian_matrix(m, n, seed):
    """An (m, n) matrix of i.i.d. standard normals, drawn row-major."""
    if m < 1 or n < 1:
        raise InvalidDims(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    rng = Xoshiro256StarStar(seed)
    return rng.normals(m * n).reshape(m, n)


def partial_orthogonal_matrix(m, n, seed):
    """sqrt(n/m) times m uniformly chosen rows of a random orthogonal matrix.

    The orthogonal factor comes from QR on an (n, n) Gaussian draw with the
    sign convention that makes R's diagonal nonnegative; the m row indices
    are then drawn without replacement from the same stream and sorted.
    """
    if not 1 <= m <= n:
        raise InvalidDims(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = Xoshiro256StarStar(seed)
    gauss = rng.normals(n * n).reshape(n, n)
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    rows = sorted(rng.subset(n, m))
    return math.sqrt(n / m) * q[rows]


def apply(phi, x):
    """Apply a real matrix to a quaternion vector, one product per component."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2:
        raise DimMismatch("expected a 2-d matrix")
    if phi.shape[1] != len(x):
        raise DimMismatch(
            f"matrix has {phi.shape[1]} columns but vector has length {len(x)}")
    return QVector(phi @ x.components)


def _jacobi_eigenvalues(matrix, max_sweeps=60):
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(matrix, dtype=float)
    d = a.shape[0]
    if d == 1:
        return a[0, :1].copy()
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                off = max(off, abs(a[p, q]))
        if off <= 1e-15 * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                col_p = c * a[:, p] - s * a[:, q]
                col_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = col_p, col_q
                a[p, q] = a[q, p] = 0.0
    return np.diag(a).copy()


def rip_constant_exact(phi, s, support_cap=DEFAULT_SUPPORT_CAP):
    """delta_s by enumerating every size-s support and its Gram eigenvalues."""
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[1]
    if not 1 <= s <= n:
        raise SOutOfRange(f"s={s} outside [1, {n}]")
    count = math.comb(n, s)
    if count > support_cap:
        raise TooManySupports(
            f"C({n},{s}) = {count} supports exceeds cap {support_cap}")
    gram = phi.T @ phi
    worst = 0.0
    for support in combinations(range(n), s):
        sub = gram[np.ix_(support, support)]
        eigs = _jacobi_eigenvalues(sub)
        worst = max(worst, float(eigs.max()) - 1.0, 1.0 - float(eigs.min()))
    return RipEstimate(s=s, value=max(worst, 0.0), method=EXACT_BRUTE_FORCE)


def rip_constant_lower_bound(phi, s, trials, seed):
    """Monte-Carlo lower bound on delta_s from random s-sparse unit vectors.

    Each trial draws a support and s standard-normal values and records the
    relative deviation of |phi x|^2 from |x|^2.  When C(n, s) <= trials the
    supports are cycled through exhaustively in lexicographic order instead
    of sampled, so tiny instances hit every support.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[1]
    if not 1 <= s <= n:
        raise SOutOfRange(f"s={s} outside [1, {n}]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = Xoshiro256StarStar(seed)
    count = math.comb(n, s)
    enumerated = None
    if count <= trials:
        enumerated = list(combinations(range(n), s))
    worst = 0.0
    for trial in range(trials):
        if enumerated is not None:
            support = list(enumerated[trial % count])
        else:
            support = rng.subset(n, s)
        values = rng.normals(s)
        norm_sq = float(values @ values)
        if norm_sq == 0.0:
            continue
        image = phi[:, support] @ values
        deviation = abs(float(image @ image) / norm_sq - 1.0)
        worst = max(worst, deviation)
    return RipEstimate(s=s, value=worst, method=RANDOMIZED_LOWER_BOUND,
                       trials=trials)


def coherence(phi):
    """Largest normalized inner product between two distinct columns."""
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[1]
    if n < 2:
        raise InvalidDims("coherence needs at least two columns")
    norms = np.sqrt((phi ** 2).sum(axis=0))
    if (norms == 0.0).any():
        raise ZeroColumn("matrix has a zero column")
    normalized = phi / norms
    gram = np.abs(normalized.T @ normalized)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


_MAT_MAGIC = "QCSMAT"


def write_matrix(phi, path):
    """Write a real matrix in the QCSMAT v1 text format."""
    phi = np.asarray(phi, dtype=float)
    m, n = phi.shape
    with open(path, "w") as fh:
        fh.write(f"{_MAT_MAGIC} 1 {m} {n}\n")
        for row in phi:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path):
    """Read a QCSMAT v1 file back into an (m, n) array."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != _MAT_MAGIC or header[1] != "1":
            raise FormatError(f"{path}: not a QCSMAT v1 file")
        try:
            m, n = int(header[2]), int(header[3])
        except ValueError as exc:
            raise FormatError(f"{path}: bad dimension fields") from exc
        rows = []
        for line_no in range(m):
            parts = fh.readline().split()
            if len(parts) != n:
                raise FormatError(f"{path}: row {line_no} malformed")
            rows.append([float(p) for p in parts])
    return np.array(rows)
