"""Quaternion scalars and dense quaternion vectors.

Scalars carry exact Hamilton-product semantics over 64-bit floats; vectors
are stored as immutable ``(n, 4)`` float64 arrays so norms, inner products
and the polarization identities vectorize.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, LengthMismatch, SOutOfRange

__all__ = [
    "Quaternion",
    "QVector",
    "ImaginaryUnitDecomposition",
    "qmul",
    "qconj",
    "inner_product",
    "lp_norm",
    "imaginary_unit_decompose",
    "polarization_i",
    "polarization_ii",
    "best_s_approx",
    "read_signal",
    "write_signal",
]


class Quaternion:
    """A quaternion ``a + b*i + c*j + d*k`` with float64 components."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a=0.0, b=0.0, c=0.0, d=0.0):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)
        if not (math.isfinite(self.a) and math.isfinite(self.b)
                and math.isfinite(self.c) and math.isfinite(self.d)):
            raise ValueError("quaternion components must be finite")

    @property
    def real(self):
        return self.a

    @property
    def imag(self):
        """The imaginary part b*i + c*j + d*k as a quaternion."""
        return Quaternion(0.0, self.b, self.c, self.d)

    def conj(self):
        return qconj(self)

    def norm(self):
        return math.sqrt(self.a * self.a + self.b * self.b
                         + self.c * self.c + self.d * self.d)

    __abs__ = norm

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def as_array(self):
        return np.array([self.a, self.b, self.c, self.d])

    @classmethod
    def from_array(cls, arr):
        return cls(arr[0], arr[1], arr[2], arr[3])

    def __add__(self, other):
        other = _coerce(other)
        return Quaternion(self.a + other.a, self.b + other.b,
                          self.c + other.c, self.d + other.d)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Quaternion(self.a - other.a, self.b - other.b,
                          self.c - other.c, self.d - other.d)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other):
        if isinstance(other, QVector):
            return NotImplemented
        return qmul(self, _coerce(other))

    def __rmul__(self, other):
        return qmul(_coerce(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(self.a / other, self.b / other,
                              self.c / other, self.d / other)
        return NotImplemented

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return self.as_tuple() == other.as_tuple()

    def __hash__(self):
        return hash(self.as_tuple())

    def __repr__(self):
        return f"Quaternion({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"


def _coerce(value):
    if isinstance(value, Quaternion):
        return value
    if isinstance(value, (int, float)):
        return Quaternion(float(value))
    raise TypeError(f"cannot interpret {type(value).__name__} as a quaternion")


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def qmul(q, w):
    """Hamilton product of two quaternions (non-commutative)."""
    return Quaternion(
        q.a * w.a - q.b * w.b - q.c * w.c - q.d * w.d,
        q.a * w.b + q.b * w.a + q.c * w.d - q.d * w.c,
        q.a * w.c - q.b * w.d + q.c * w.a + q.d * w.b,
        q.a * w.d + q.b * w.c - q.c * w.b + q.d * w.a,
    )


def qconj(q):
    """Conjugate a - b*i - c*j - d*k; satisfies q * conj(q) = |q|^2."""
    return Quaternion(q.a, -q.b, -q.c, -q.d)


def _hamilton_rows(p, q):
    """Row-wise Hamilton product of two (n, 4) component arrays."""
    a1, b1, c1, d1 = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
    a2, b2, c2, d2 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=1,
    )


class QVector:
    """Dense quaternion vector backed by an immutable (n, 4) float64 array."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4 or arr.shape[0] < 1:
            raise ValueError("expected an (n, 4) component array with n >= 1")
        if not np.isfinite(arr).all():
            raise ValueError("vector components must be finite")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def from_quaternions(cls, quaternions):
        rows = [q.as_tuple() for q in quaternions]
        return cls(np.array(rows, dtype=float))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, 4)))

    @property
    def components(self):
        """The (n, 4) component array (read-only view)."""
        return self._data

    @property
    def entries(self):
        return [Quaternion.from_array(row) for row in self._data]

    def __len__(self):
        return self._data.shape[0]

    def __getitem__(self, index):
        return Quaternion.from_array(self._data[index])

    def __add__(self, other):
        self._check_same_length(other)
        return QVector(self._data + other._data)

    def __sub__(self, other):
        self._check_same_length(other)
        return QVector(self._data - other._data)

    def __neg__(self):
        return QVector(-self._data)

    def __rmul__(self, scalar):
        """Left scalar multiple lambda * x, entrywise Hamilton products."""
        lam = _coerce(scalar)
        lam_rows = np.broadcast_to(lam.as_array(), self._data.shape)
        return QVector(_hamilton_rows(lam_rows, self._data))

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return QVector(self._data * float(scalar))
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, QVector):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            (self._data == other._data).all())

    def __repr__(self):
        return f"QVector(n={len(self)})"

    def norms(self):
        """Per-entry quaternion magnitudes |x_i|."""
        return np.sqrt((self._data ** 2).sum(axis=1))

    def support(self):
        """Indices of exactly-nonzero entries."""
        nonzero = (self._data != 0.0).any(axis=1)
        return [int(i) for i in np.nonzero(nonzero)[0]]

    def _check_same_length(self, other):
        if len(self) != len(other):
            raise LengthMismatch(f"lengths differ: {len(self)} vs {len(other)}")


def inner_product(x, y):
    """Quaternion-valued inner product sum_i x_i * conj(y_i).

    Conjugate-symmetric, H-linear in the first slot, and real nonnegative
    on the diagonal.
    """
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    yc = y.components * np.array([1.0, -1.0, -1.0, -1.0])
    total = _hamilton_rows(x.components, yc).sum(axis=0)
    return Quaternion.from_array(total)


def lp_norm(x, p):
    """The l_p norm of a quaternion vector for p in {0, 1, 2, inf}.

    p = 0 counts exactly-nonzero entries (no tolerance); p = inf is the
    largest entry magnitude.
    """
    if p == 0:
        return float((x.components != 0.0).any(axis=1).sum())
    if p == 1:
        return float(x.norms().sum())
    if p == 2:
        return float(math.sqrt((x.components ** 2).sum()))
    if p == math.inf:
        return float(x.norms().max())
    raise ValueError(f"unsupported p: {p!r} (expected 0, 1, 2 or inf)")


@dataclass(frozen=True)
class ImaginaryUnitDecomposition:
    """Splitting q = a + u*b with a real, b >= 0, u a unit imaginary quaternion."""

    a: float
    b: float
    u: Quaternion

    def reassemble(self):
        return Quaternion(self.a) + qmul(self.u, Quaternion(self.b))


def imaginary_unit_decompose(q):
    """Write q = a + u*b with b = |Im(q)| and u = Im(q)/b (u = i when b = 0)."""
    a = q.a
    b = math.sqrt(q.b * q.b + q.c * q.c + q.d * q.d)
    if b == 0.0:
        u = I
    else:
        u = Quaternion(0.0, q.b / b, q.c / b, q.d / b)
    return ImaginaryUnitDecomposition(a=a, b=b, u=u)


def _norm_sq(arr):
    return float((arr ** 2).sum())


def polarization_i(x, y):
    """Recover <x, y> from eight squared norms, one pair per algebra unit.

    Evaluates (1/4)(|x+y|^2 - |x-y|^2) plus the i, j, k terms built from
    |x +- e*y|^2 with e running over the three imaginary units.
    """
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    xd, yd = x.components, y.components
    real_term = 0.25 * (_norm_sq(xd + yd) - _norm_sq(xd - yd))
    out = Quaternion(real_term)
    for unit in (I, J, K):
        ey = np.broadcast_to(unit.as_array(), yd.shape)
        uy = _hamilton_rows(ey, yd)
        coeff = 0.25 * (_norm_sq(xd + uy) - _norm_sq(xd - uy))
        out = out + qmul(unit, Quaternion(coeff))
    return out


def polarization_ii(x, y):
    """Two-term polarization: real part plus a single u-term.

    The unit u comes from the imaginary-unit decomposition of <x, y>, so the
    identity reads <x,y> = (1/4)(|x+y|^2-|x-y|^2) + (u/4)(|x+uy|^2-|x-uy|^2).
    """
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    u = imaginary_unit_decompose(inner_product(x, y)).u
    xd, yd = x.components, y.components
    real_term = 0.25 * (_norm_sq(xd + yd) - _norm_sq(xd - yd))
    uy = _hamilton_rows(np.broadcast_to(u.as_array(), yd.shape), yd)
    u_coeff = 0.25 * (_norm_sq(xd + uy) - _norm_sq(xd - uy))
    return Quaternion(real_term) + qmul(u, Quaternion(u_coeff))


def best_s_approx(x, s):
    """Keep the s entries of largest magnitude, zero the rest.

    Ties are broken toward the lowest index so the result is deterministic.
    """
    n = len(x)
    if not 0 <= s <= n:
        raise SOutOfRange(f"s={s} outside [0, {n}]")
    order = np.argsort(-x.norms(), kind="stable")
    keep = order[:s]
    out = np.zeros_like(x.components)
    out[keep] = x.components[keep]
    return QVector(out)


_SIG_MAGIC = "QCSSIG"


def write_signal(x, path):
    """Write a quaternion vector in the QCSSIG v1 text format."""
    with open(path, "w") as fh:
        fh.write(f"{_SIG_MAGIC} 1 {len(x)}\n")
        for row in x.components:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_signal(path):
    """Read a QCSSIG v1 file back into a QVector."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != _SIG_MAGIC or header[1] != "1":
            raise FormatError(f"{path}: not a QCSSIG v1 file")
        try:
            n = int(header[2])
        except ValueError as exc:
            raise FormatError(f"{path}: bad length field") from exc
        rows = []
        for line_no in range(n):
            parts = fh.readline().split()
            if len(parts) != 4:
                raise FormatError(f"{path}: entry {line_no} malformed")
            rows.append([float(p) for p in parts])
    return QVector(np.array(rows))
