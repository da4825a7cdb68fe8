"""Second-order cone programs and an embedded primal-dual solver.

The program form is

    minimize    c.x
    subject to  A x = b,   x in K,

with K a product of second-order cones {(t, v) : t >= |v|_2}.  Quaternion
l1 minimization maps onto this form with one dimension-5 cone per signal
entry; the noisy variant appends a single residual cone.

The solver runs a homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step, so primal/dual
infeasibility is detected instead of diverging.  Each iteration solves the
dense normal equations A W^2 A' by Cholesky with a small static diagonal
regularization, followed by one pass of iterative refinement.
"""

import math
from dataclasses import dataclass
from itertools import groupby

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import (
    DimMismatch,
    FormatError,
    LayoutMismatch,
    NegativeEta,
    RankDeficient,
    SolverFailure,
)
from .quat import QVector

__all__ = [
    "ConeProgram",
    "SolverSettings",
    "Solution",
    "KktResiduals",
    "OPTIMAL",
    "PRIMAL_INFEASIBLE",
    "DUAL_INFEASIBLE",
    "ITER_LIMIT",
    "NUMERICAL_FAILURE",
    "build_noiseless",
    "build_noisy",
    "solve",
    "extract_signal",
    "kkt_report",
    "write_program",
    "read_program",
]

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
ITER_LIMIT = "IterLimit"
NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverSettings:
    tol_gap: float = 1e-9
    tol_primal: float = 1e-9
    tol_dual: float = 1e-9
    max_iters: int = 200
    static_regularization: float = 1e-10

    def __post_init__(self):
        if min(self.tol_gap, self.tol_primal, self.tol_dual) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.static_regularization < 0:
            raise ValueError("static_regularization must be >= 0")


@dataclass
class ConeProgram:
    """Standard-form cone program (c, A, b, second-order cone dims)."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cone_dims: list

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.cone_dims = [int(d) for d in self.cone_dims]
        if any(d < 1 for d in self.cone_dims):
            raise DimMismatch("cone dimensions must be >= 1")
        n = self.c.shape[0]
        if sum(self.cone_dims) != n:
            raise DimMismatch(
                f"cone dims sum to {sum(self.cone_dims)}, expected {n}")
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise DimMismatch("A must be (M, N) with N = len(c)")
        if self.b.shape != (self.A.shape[0],):
            raise DimMismatch("b must have one entry per row of A")

    @property
    def num_vars(self):
        return self.c.shape[0]

    @property
    def num_eq(self):
        return self.b.shape[0]


@dataclass
class Solution:
    status: str
    x: np.ndarray
    objective: float
    iters: int
    residuals: dict
    y: np.ndarray = None
    z: np.ndarray = None
    tau: float = 1.0
    kappa: float = 0.0


@dataclass(frozen=True)
class KktResiduals:
    primal: float
    dual: float
    gap: float


def build_noiseless(phi, y):
    """Cone program for min |z|_1 s.t. Phi z = y over quaternion vectors.

    Variables interleave as (t_k, x_rk, x_ik, x_jk, x_kk) per signal entry;
    equalities stack the r, i, j, k component rows of the measurements.
    """
    phi = np.asarray(phi, dtype=float)
    m, n = phi.shape
    if m != len(y):
        raise DimMismatch(f"matrix has {m} rows but observation length is {len(y)}")
    big_n = 5 * n
    c = np.zeros(big_n)
    c[0::5] = 1.0
    a = np.zeros((4 * m, big_n))
    for comp in range(4):
        rows = slice(comp * m, (comp + 1) * m)
        cols = slice(1 + comp, big_n, 5)
        a[rows, cols] = phi
    b = y.components.T.reshape(-1)  # (y_r, y_i, y_j, y_k) stacked
    return ConeProgram(c=c, A=a, b=b, cone_dims=[5] * n)


def build_noisy(phi, y, eta):
    """Cone program for min |z|_1 s.t. |Phi z - y|_2 <= eta.

    Extends the noiseless layout with a residual block: variables
    (..., u, r_1..r_4m), equalities Phi~ x~ + r = y~ and u = eta, and one
    extra cone of dimension 4m + 1 with u leading.
    """
    if eta < 0:
        raise NegativeEta(f"eta must be >= 0, got {eta}")
    base = build_noiseless(phi, y)
    m = phi.shape[0]
    n = phi.shape[1]
    big_n = 5 * n + 1 + 4 * m
    big_m = 4 * m + 1
    c = np.zeros(big_n)
    c[: 5 * n] = base.c
    a = np.zeros((big_m, big_n))
    a[: 4 * m, : 5 * n] = base.A
    a[: 4 * m, 5 * n + 1:] = np.eye(4 * m)
    a[4 * m, 5 * n] = 1.0
    b = np.concatenate([base.b, [float(eta)]])
    return ConeProgram(c=c, A=a, b=b, cone_dims=[5] * n + [4 * m + 1])


def extract_signal(sol, n):
    """Read the quaternion minimizer out of a solved program's variables."""
    if sol.status != OPTIMAL:
        raise SolverFailure(
            f"cannot extract a signal from a {sol.status} solution", sol)
    big_n = sol.x.shape[0]
    trailing = big_n - 5 * n
    if trailing != 0 and (trailing < 5 or (trailing - 1) % 4 != 0):
        raise LayoutMismatch(
            f"solution has {big_n} variables; expected 5*{n} or a noisy layout")
    blocks = sol.x[: 5 * n].reshape(n, 5)
    return QVector(blocks[:, 1:5])


# ---------------------------------------------------------------------------
# Cone utilities.  Blocks of equal dimension are contiguous by construction,
# so each "group" below is a (offset, count, dim) run that reshapes without
# copying.


class _Cones:
    def __init__(self, dims):
        self.dims = list(dims)
        self.total = sum(dims)
        self.degree = len(dims)
        groups = []
        offset = 0
        for dim, run in groupby(dims):
            count = len(list(run))
            groups.append((offset, count, dim))
            offset += count * dim
        self.groups = groups

    def views(self, v):
        for offset, count, dim in self.groups:
            yield v[offset:offset + count * dim].reshape(count, dim)

    def identity(self):
        e = np.zeros(self.total)
        for offset, count, dim in self.groups:
            e[offset:offset + count * dim:dim] = 1.0
        return e

    def jdet(self, v):
        """Per-block hyperbolic determinant v0^2 - |v1|^2, concatenated."""
        parts = []
        for g in self.views(v):
            parts.append(g[:, 0] ** 2 - (g[:, 1:] ** 2).sum(axis=1))
        return np.concatenate(parts)

    def inside(self, v):
        return bool((self.jdet(v) > 0).all()) and all(
            (g[:, 0] > 0).all() for g in self.views(v))

    def jmul(self, u, v):
        out = np.empty(self.total)
        for (offset, count, dim), ug, vg in zip(
                self.groups, self.views(u), self.views(v)):
            og = out[offset:offset + count * dim].reshape(count, dim)
            og[:, 0] = (ug * vg).sum(axis=1)
            og[:, 1:] = ug[:, :1] * vg[:, 1:] + vg[:, :1] * ug[:, 1:]
        return out

    def jsolve(self, lam, d):
        """Solve lam o u = d blockwise (lam must be interior)."""
        out = np.empty(self.total)
        for (offset, count, dim), lg, dg in zip(
                self.groups, self.views(lam), self.views(d)):
            det = lg[:, 0] ** 2 - (lg[:, 1:] ** 2).sum(axis=1)
            og = out[offset:offset + count * dim].reshape(count, dim)
            og[:, 0] = (lg[:, 0] * dg[:, 0] - (lg[:, 1:] * dg[:, 1:]).sum(axis=1)) / det
            og[:, 1:] = (dg[:, 1:] - lg[:, 1:] * og[:, :1]) / lg[:, :1]
        return out

    def max_step(self, u, du):
        """Largest step with u + step*du still in the cone (inf if unbounded)."""
        best = math.inf
        for ug, dg in zip(self.views(u), self.views(du)):
            a = dg[:, 0] ** 2 - (dg[:, 1:] ** 2).sum(axis=1)
            b = 2.0 * (ug[:, 0] * dg[:, 0] - (ug[:, 1:] * dg[:, 1:]).sum(axis=1))
            cc = ug[:, 0] ** 2 - (ug[:, 1:] ** 2).sum(axis=1)
            steps = np.full(a.shape, math.inf)
            linear = a == 0.0
            hit = linear & (b < 0.0)
            steps[hit] = -cc[hit] / b[hit]
            quad = ~linear
            disc = b * b - 4.0 * a * cc
            real = quad & (disc >= 0.0)
            if real.any():
                sq = np.sqrt(np.where(real, disc, 0.0))
                sign_b = np.where(b >= 0.0, 1.0, -1.0)
                qq = -(b + sign_b * sq) / 2.0
                with np.errstate(divide="ignore", invalid="ignore"):
                    r1 = np.where(real & (a != 0.0), qq / np.where(a != 0.0, a, 1.0), math.inf)
                    r2 = np.where(real & (qq != 0.0), cc / np.where(qq != 0.0, qq, 1.0), math.inf)
                r1 = np.where(r1 > 0.0, r1, math.inf)
                r2 = np.where(r2 > 0.0, r2, math.inf)
                steps = np.minimum(steps, np.where(real, np.minimum(r1, r2), math.inf))
            if steps.size:
                best = min(best, float(steps.min()))
        return best


class _Scaling:
    """Nesterov-Todd scaling W with W z = W^{-1} x = lam for each block."""

    def __init__(self, cones, x, z):
        self.cones = cones
        self.v = []
        self.beta = []
        for xg, zg in zip(cones.views(x), cones.views(z)):
            det_x = xg[:, 0] ** 2 - (xg[:, 1:] ** 2).sum(axis=1)
            det_z = zg[:, 0] ** 2 - (zg[:, 1:] ** 2).sum(axis=1)
            if not ((det_x > 0).all() and (det_z > 0).all()
                    and np.isfinite(det_x).all() and np.isfinite(det_z).all()):
                raise FloatingPointError("scaling point left the cone interior")
            ax = np.sqrt(det_x)
            az = np.sqrt(det_z)
            xbar = xg / ax[:, None]
            zbar = zg / az[:, None]
            gamma = np.sqrt((1.0 + (xbar * zbar).sum(axis=1)) / 2.0)
            # scaling point, then its cone square root (Householder vector)
            wbar = zbar.copy()
            wbar[:, 1:] *= -1.0
            wbar = (xbar + wbar) / (2.0 * gamma)[:, None]
            v = wbar.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2.0 * (1.0 + wbar[:, 0]))[:, None]
            self.v.append(v)
            self.beta.append(np.sqrt(ax / az))
        self.lam = self.apply(z)

    def _transform(self, u, invert):
        out = np.empty(self.cones.total)
        for (offset, count, dim), v, beta, ug in zip(
                self.cones.groups, self.v, self.beta, self.cones.views(u)):
            w = ug.copy()
            if invert:
                w[:, 1:] *= -1.0
            dot = (v * w).sum(axis=1)
            res = 2.0 * v * dot[:, None]
            res[:, 0] -= w[:, 0]
            res[:, 1:] += w[:, 1:]
            if invert:
                res[:, 1:] *= -1.0
                res /= beta[:, None]
            else:
                res *= beta[:, None]
            out[offset:offset + count * dim] = res.reshape(-1)
        return out

    def apply(self, u):
        """W u."""
        return self._transform(u, invert=False)

    def apply_inv(self, u):
        """W^{-1} u."""
        return self._transform(u, invert=True)

    def apply_sq(self, u):
        """W^2 u."""
        return self.apply(self.apply(u))

    def apply_mat(self, mat):
        """W applied to each column of an (N, k) matrix, blockwise."""
        out = np.empty_like(mat)
        for (offset, count, dim), v, beta in zip(
                self.cones.groups, self.v, self.beta):
            blk = mat[offset:offset + count * dim].reshape(count, dim, -1)
            dot = np.einsum("kd,kdm->km", v, blk)
            res = 2.0 * v[:, :, None] * dot[:, None, :]
            res[:, 0, :] -= blk[:, 0, :]
            res[:, 1:, :] += blk[:, 1:, :]
            res *= beta[:, None, None]
            out[offset:offset + count * dim] = res.reshape(count * dim, -1)
        return out


# ---------------------------------------------------------------------------
# Presolve and residuals.


def _presolve(a, b):
    """Drop exactly-duplicate and all-zero equality rows.

    Returns (kept_row_indices, infeasible) where infeasible means a zero row
    with nonzero rhs or duplicate rows with conflicting rhs were found.
    """
    keep = []
    seen = {}
    for idx in range(a.shape[0]):
        row = a[idx]
        if not row.any():
            if b[idx] != 0.0:
                return keep, True
            continue
        key = row.tobytes()
        if key in seen:
            if b[seen[key]] != b[idx]:
                return keep, True
            continue
        seen[key] = idx
        keep.append(idx)
    return keep, False


def _residual_triple(prog, x, y, z):
    """The definitional primal/dual/gap residuals at an unscaled point."""
    primal = float(np.linalg.norm(prog.A @ x - prog.b))
    primal /= 1.0 + float(np.linalg.norm(prog.b))
    dual = float(np.linalg.norm(prog.A.T @ y + z - prog.c))
    dual /= 1.0 + float(np.linalg.norm(prog.c))
    pobj = float(prog.c @ x)
    dobj = float(prog.b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return KktResiduals(primal=primal, dual=dual, gap=gap)


def kkt_report(prog, sol):
    """Recompute the residual triple from scratch for a reported solution."""
    x = np.asarray(sol.x, dtype=float)
    y = np.zeros(prog.num_eq) if sol.y is None else np.asarray(sol.y, dtype=float)
    z = np.zeros(prog.num_vars) if sol.z is None else np.asarray(sol.z, dtype=float)
    if x.shape != (prog.num_vars,) or y.shape != (prog.num_eq,) \
            or z.shape != (prog.num_vars,):
        raise DimMismatch("solution vectors do not match the program")
    return _residual_triple(prog, x, y, z)


# ---------------------------------------------------------------------------
# The interior-point iteration.

_STEP_BACKOFF = 0.99  # fraction-to-boundary
_MIN_STEP = 1e-12


def solve(prog, settings=None):
    """Solve a cone program; returns a Solution, never raises for slow
    convergence (IterLimit / NumericalFailure are reported as statuses).

    Raises RankDeficient when the equality rows remain linearly dependent
    after duplicate/zero-row presolve.
    """
    if settings is None:
        settings = SolverSettings()
    cones = _Cones(prog.cone_dims)
    if cones.total != prog.num_vars:
        raise DimMismatch("cone dims do not cover the variable vector")

    keep, contradiction = _presolve(prog.A, prog.b)
    if contradiction:
        return _finish(prog, cones, settings, PRIMAL_INFEASIBLE,
                       np.zeros(prog.num_vars), np.zeros(len(keep)),
                       cones.identity(), 1.0, 0.0, 0, keep)
    a = prog.A[keep]
    b = prog.b[keep]
    if a.shape[0] and np.linalg.matrix_rank(a) < a.shape[0]:
        raise RankDeficient(
            "equality rows are linearly dependent after presolve")

    c = prog.c
    m_eq = a.shape[0]
    x = cones.identity()
    z = cones.identity()
    y = np.zeros(m_eq)
    tau, kappa = 1.0, 1.0
    reg = settings.static_regularization
    norm_b_full = float(np.linalg.norm(prog.b))
    norm_c = float(np.linalg.norm(c))

    status = ITER_LIMIT
    iters = 0
    best = None  # (score, x, y, z, tau, kappa)
    stalls = 0
    score_history = []
    for iteration in range(settings.max_iters + 1):
        iters = iteration
        xh, yh, zh = x / tau, _expand(y, keep, prog.num_eq) / tau, z / tau
        res = _residual_triple(prog, xh, yh, zh)
        score = max(res.primal, res.dual, res.gap)
        score_history.append(score)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), z.copy(), tau, kappa)
        if (res.primal <= settings.tol_primal
                and res.dual <= settings.tol_dual
                and res.gap <= settings.tol_gap):
            status = OPTIMAL
            break
        by = float(b @ y)
        cx = float(c @ x)
        if by > 1e-12:
            pinf = float(np.linalg.norm(a.T @ y + z)) * (1.0 + norm_b_full) / by
            if pinf <= settings.tol_dual:
                status = PRIMAL_INFEASIBLE
                return _finish(prog, cones, settings, status, x, y, z,
                               tau, kappa, iters, keep)
        if cx < -1e-12:
            dinf = float(np.linalg.norm(a @ x)) * (1.0 + norm_c) / (-cx)
            if dinf <= settings.tol_primal:
                status = DUAL_INFEASIBLE
                return _finish(prog, cones, settings, status, x, y, z,
                               tau, kappa, iters, keep)
        if iteration == settings.max_iters:
            status = ITER_LIMIT
            break

        mu = (float(x @ z) + tau * kappa) / (cones.degree + 1)
        try:
            scaling = _Scaling(cones, x, z)
        except FloatingPointError:
            status = NUMERICAL_FAILURE
            break

        w_at = scaling.apply_mat(a.T)  # W A'
        normal = w_at.T @ w_at
        # Equilibrate before factorizing: diagonal entries span many orders
        # of magnitude near convergence, and the static regularization is
        # only meaningful on a unit-diagonal matrix.
        dscale = np.sqrt(np.maximum(np.diag(normal), 1e-300))
        equilibrated = normal / np.outer(dscale, dscale)
        chol = None
        bump = 1.0
        while chol is None and bump <= 1e12:
            try:
                chol = cho_factor(equilibrated + (reg * bump) * np.eye(m_eq))
            except LinAlgError:
                bump *= 10.0
        if chol is None:
            status = NUMERICAL_FAILURE
            break
        normal_ext = normal.astype(np.longdouble)

        def normal_solve(rhs):
            # Iterative refinement against the unregularized matrix, with
            # residuals accumulated in extended precision so the attainable
            # accuracy is set by the factor, not by cancellation in the
            # residual itself.  Corrections that do not help are rolled back.
            rhs_ext = rhs.astype(np.longdouble)
            u = (cho_solve(chol, rhs / dscale) / dscale).astype(np.longdouble)
            scale = 1.0 + float(np.linalg.norm(rhs))
            best_u, best_err = u, math.inf
            for _ in range(5):
                residual = rhs_ext - normal_ext @ u
                res_norm = float(np.sqrt(float((residual ** 2).sum())))
                if res_norm < best_err:
                    best_u, best_err = u, res_norm
                else:
                    break
                if res_norm <= 1e-16 * scale:
                    break
                step = cho_solve(chol, residual.astype(float) / dscale) / dscale
                u = u + step.astype(np.longdouble)
            return best_u.astype(float)

        # Residuals of the embedding (unscaled variables).
        r_p = a @ x - b * tau
        r_d = a.T @ y + z - c * tau
        r_g = cx - by + kappa

        w2c = scaling.apply_sq(c)
        u1 = normal_solve(b + a @ w2c)
        v1 = scaling.apply_sq(a.T @ u1 - c)
        denom = float(c @ v1) - float(b @ u1) - kappa / tau

        def direction_once(rhs_p, rhs_d, rhs_g, ds, dk):
            """Solve the linearized embedding with general right-hand sides:
            A dx - b dtau = rhs_p;  A'dy + dz - c dtau = rhs_d;
            c.dx - b.dy + dkappa = rhs_g;
            lam o (W dz + W^-1 dx) = ds;  tau dkappa + kappa dtau = dk.
            """
            w = cones.jsolve(scaling.lam, ds)
            g = scaling.apply_inv(w) - rhs_d
            u2 = normal_solve(rhs_p - a @ scaling.apply_sq(g))
            v2 = scaling.apply_sq(a.T @ u2 + g)
            dtau = (rhs_g - float(c @ v2) + float(b @ u2) - dk / tau) / denom
            dx = dtau * v1 + v2
            dy = dtau * u1 + u2
            dz = scaling.apply_inv(w - scaling.apply_inv(dx))
            dkappa = (dk - kappa * dtau) / tau
            return dx, dy, dz, dtau, dkappa

        def newton_error(delta, rhs_p, rhs_d, rhs_g, ds, dk):
            dx, dy, dz, dtau, dkappa = delta
            ep = rhs_p - (a @ dx - b * dtau)
            ed = rhs_d - (a.T @ dy + dz - c * dtau)
            eg = rhs_g - (float(c @ dx) - float(b @ dy) + dkappa)
            es = ds - cones.jmul(
                scaling.lam, scaling.apply(dz) + scaling.apply_inv(dx))
            ek = dk - (tau * dkappa + kappa * dtau)
            err = max(float(np.linalg.norm(ep)), float(np.linalg.norm(ed)),
                      abs(eg), float(np.linalg.norm(es)), abs(ek))
            return err, (ep, ed, eg, es, ek)

        def direction(rhs_p, rhs_d, rhs_g, ds, dk, refine=3):
            delta = direction_once(rhs_p, rhs_d, rhs_g, ds, dk)
            err, resid = newton_error(delta, rhs_p, rhs_d, rhs_g, ds, dk)
            scale = 1e-14 * (1.0 + max(
                float(np.linalg.norm(rhs_p)), float(np.linalg.norm(rhs_d)),
                abs(rhs_g), float(np.linalg.norm(ds)), abs(dk)))
            for _ in range(refine):
                if err <= scale:
                    break
                corr = direction_once(*resid)
                cand = tuple(u + v for u, v in zip(delta, corr))
                cand_err, cand_resid = newton_error(cand, rhs_p, rhs_d,
                                                    rhs_g, ds, dk)
                if cand_err >= err:
                    break
                delta, err, resid = cand, cand_err, cand_resid
            return delta

        lam_sq = cones.jmul(scaling.lam, scaling.lam)
        dxa, dya, dza, dta, dka = direction(-r_p, -r_d, -r_g, -lam_sq,
                                            -tau * kappa)
        alpha_aff = min(
            1.0,
            cones.max_step(x, dxa),
            cones.max_step(z, dza),
            tau / -dta if dta < 0 else math.inf,
            kappa / -dka if dka < 0 else math.inf,
        )
        mu_aff = (float((x + alpha_aff * dxa) @ (z + alpha_aff * dza))
                  + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)) \
            / (cones.degree + 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))

        # Directions degrade into noise once complementarity runs orders of
        # magnitude ahead of the residuals.  When the residual score has
        # also stopped falling, take a recentering step that raises mu back
        # toward the residual scale (residual targets held fixed) instead
        # of a predictor step; trajectories still progressing are left alone.
        balance = mu / max(score, 1e-300)
        stalled_progress = (len(score_history) >= 3
                            and score > 0.7 * score_history[-3])
        if balance < 5e-3 and stalled_progress:
            sigma_rc = min(4.0, 0.05 * score / mu)
            ds = sigma_rc * mu * cones.identity() - lam_sq
            dk = sigma_rc * mu - tau * kappa
            dx, dy, dz, dtau, dkappa = direction(
                np.zeros(m_eq), np.zeros(cones.total), 0.0, ds, dk)
        else:
            correction = cones.jmul(scaling.apply_inv(dxa),
                                    scaling.apply(dza))
            ds = sigma * mu * cones.identity() - lam_sq - correction
            dk = sigma * mu - tau * kappa - dta * dka
            eta = 1.0 - sigma
            dx, dy, dz, dtau, dkappa = direction(-eta * r_p, -eta * r_d,
                                                 -eta * r_g, ds, dk)

        def boundary_step(ddx, ddz, ddtau, ddkappa):
            return min(1.0, _STEP_BACKOFF * min(
                cones.max_step(x, ddx),
                cones.max_step(z, ddz),
                tau / -ddtau if ddtau < 0 else math.inf,
                kappa / -ddkappa if ddkappa < 0 else math.inf,
            ))

        alpha = boundary_step(dx, dz, dtau, dkappa)
        import os as _os
        if _os.environ.get("QCS_SOCP_TRACE"):
            print(f"TRACE it={iteration} p={res.primal:.2e} d={res.dual:.2e} "
                  f"g={res.gap:.2e} mu={mu:.2e} tau={tau:.3e} sig={sigma:.3f} "
                  f"a={alpha:.2e} stalls={stalls}")
        if alpha <= 1e-6:
            # The combined step collapsed, usually because the iterate has
            # drifted off-center; a pure centering step restores geometry
            # without touching the residual targets.
            ds_c = mu * cones.identity() - lam_sq
            dxc, dyc, dzc, dtc, dkc = direction(
                np.zeros(m_eq), np.zeros(cones.total), 0.0, ds_c,
                mu - tau * kappa)
            alpha_c = boundary_step(dxc, dzc, dtc, dkc)
            if alpha_c > alpha:
                dx, dy, dz, dtau, dkappa = dxc, dyc, dzc, dtc, dkc
                alpha = alpha_c
        if not math.isfinite(alpha) or alpha <= _MIN_STEP:
            status = NUMERICAL_FAILURE
            break
        if alpha <= 1e-6:
            # directions this short no longer make progress; numerical noise
            # dominates once mu falls far below the linear-solve accuracy
            stalls += 1
            if stalls >= 3:
                status = NUMERICAL_FAILURE
                break
        else:
            stalls = 0
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        tau += alpha * dtau
        kappa += alpha * dkappa

    if status != OPTIMAL and best is not None:
        _, x, y, z, tau, kappa = best
    return _finish(prog, cones, settings, status, x, y, z, tau, kappa,
                   iters, keep)


def _expand(y, keep, m_full):
    out = np.zeros(m_full)
    out[keep] = y
    return out


def _finish(prog, cones, settings, status, x, y, z, tau, kappa, iters, keep):
    scale = tau if tau > 1e-300 else 1.0
    xh = x / scale
    yh = _expand(y, keep, prog.num_eq) / scale
    zh = z / scale
    res = _residual_triple(prog, xh, yh, zh)
    return Solution(
        status=status,
        x=xh,
        objective=float(prog.c @ xh),
        iters=iters,
        residuals={"primal": res.primal, "dual": res.dual, "gap": res.gap},
        y=yh,
        z=zh,
        tau=tau,
        kappa=kappa,
    )


# ---------------------------------------------------------------------------
# Debug dump of a cone program ("QCSSOCP v1").

_SOCP_MAGIC = "QCSSOCP"


def write_program(prog, path):
    """Write a cone program as QCSSOCP v1 text for offline cross-checks."""
    with open(path, "w") as fh:
        fh.write(f"{_SOCP_MAGIC} 1 {prog.num_vars} {prog.num_eq}\n")
        fh.write("cones " + " ".join(str(d) for d in prog.cone_dims) + "\n")
        fh.write("c " + " ".join(f"{v:.17g}" for v in prog.c) + "\n")
        fh.write("b " + " ".join(f"{v:.17g}" for v in prog.b) + "\n")
        for row in prog.A:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_program(path):
    """Read a QCSSOCP v1 file back into a ConeProgram."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != _SOCP_MAGIC or header[1] != "1":
            raise FormatError(f"{path}: not a QCSSOCP v1 file")
        n, m = int(header[2]), int(header[3])
        cone_line = fh.readline().split()
        if not cone_line or cone_line[0] != "cones":
            raise FormatError(f"{path}: missing cone line")
        dims = [int(v) for v in cone_line[1:]]
        c_line = fh.readline().split()
        b_line = fh.readline().split()
        if c_line[:1] != ["c"] or b_line[:1] != ["b"]:
            raise FormatError(f"{path}: missing c/b lines")
        c = np.array([float(v) for v in c_line[1:]])
        b = np.array([float(v) for v in b_line[1:]])
        rows = []
        for line_no in range(m):
            parts = fh.readline().split()
            if len(parts) != n:
                raise FormatError(f"{path}: row {line_no} malformed")
            rows.append([float(p) for p in parts])
    a = np.array(rows) if rows else np.zeros((0, n))
    return ConeProgram(c=c, A=a, b=b, cone_dims=dims)
