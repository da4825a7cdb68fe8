"""High-level l1 recovery plus the stability-bound constants and checks.

`recover` ties the measurement model to the cone solver; the remaining
helpers evaluate the worst-case error bounds that hold whenever the
measurement matrix has a 2s-isometry constant below 1/3.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import quat, sensing, socp
from .errors import (
    DegenerateDenominator,
    DeltaOutOfRange,
    InfeasibleProblem,
    LengthMismatch,
    NegativeEta,
    SOutOfRange,
    SolverFailure,
)

__all__ = [
    "RecoveryResult",
    "BoundReport",
    "theoretical_constants",
    "recover",
    "check_bounds",
    "c0_ratios",
]

DELTA_LIMIT = 1.0 / 3.0


@dataclass
class RecoveryResult:
    x_hat: quat.QVector
    l1_objective: float
    solver: socp.Solution
    error_l1: float = None
    error_l2: float = None


@dataclass(frozen=True)
class BoundReport:
    s: int
    delta_2s: float
    eta: float
    C0: float
    C1: float
    lhs_l1: float
    rhs_l1: float
    lhs_l2: float
    rhs_l2: float
    satisfied: tuple


def theoretical_constants(delta_2s):
    """The stability constants C0 = 2(1+d)/(1-3d) and C1 = 4 sqrt(1+d)/(1-3d).

    Only defined for 0 <= delta_2s < 1/3; outside that range the recovery
    guarantee has no content and DeltaOutOfRange is raised.
    """
    if not 0.0 <= delta_2s < DELTA_LIMIT:
        raise DeltaOutOfRange(
            f"delta_2s={delta_2s} outside [0, 1/3)")
    denom = 1.0 - 3.0 * delta_2s
    c0 = 2.0 * (1.0 + delta_2s) / denom
    c1 = 4.0 * math.sqrt(1.0 + delta_2s) / denom
    return c0, c1


def recover(phi, y, eta, settings=None, x_true=None):
    """Minimum-l1 quaternion reconstruction from y within the noise ball eta.

    eta = 0 dispatches to the equality-constrained program; eta > 0 uses the
    residual-cone formulation.  The returned minimizer is feasibility-checked
    against the original measurements.
    """
    phi = np.asarray(phi, dtype=float)
    if eta < 0:
        raise NegativeEta(f"eta must be >= 0, got {eta}")
    if eta == 0.0:
        prog = socp.build_noiseless(phi, y)
    else:
        prog = socp.build_noisy(phi, y, eta)
    sol = socp.solve(prog, settings)
    if sol.status == socp.PRIMAL_INFEASIBLE:
        raise InfeasibleProblem(
            "no signal is consistent with the measurements at this eta", sol)
    if sol.status != socp.OPTIMAL:
        raise SolverFailure(f"solver terminated with status {sol.status}", sol)
    x_hat = _polish(phi, socp.extract_signal(sol, phi.shape[1]), y, eta)
    misfit = quat.lp_norm(sensing.apply(phi, x_hat) - y, 2)
    if misfit > eta + 1e-7:
        raise SolverFailure(
            f"recovered point violates the measurement constraint "
            f"(|Phi x - y| = {misfit:.3e} > eta + 1e-7)", sol)
    result = RecoveryResult(
        x_hat=x_hat,
        l1_objective=quat.lp_norm(x_hat, 1),
        solver=sol,
    )
    if x_true is not None:
        diff = x_hat - x_true
        result.error_l1 = quat.lp_norm(diff, 1)
        result.error_l2 = quat.lp_norm(diff, 2)
    return result


def _polish(phi, x_hat, y, eta):
    """Project the minimizer back onto the measurement constraint.

    The cone solver leaves a small equation residual; the minimum-norm
    correction (componentwise, via the normal equations of phi phi^T)
    removes it without measurably moving the point.  With eta > 0 the
    correction only shrinks the residual to the constraint radius.
    """
    residual = phi @ x_hat.components - y.components
    norm = float(np.sqrt((residual ** 2).sum()))
    if norm == 0.0:
        return x_hat
    shrink = 1.0 if eta == 0.0 else max(0.0, 1.0 - eta / norm)
    if shrink == 0.0:
        return x_hat
    gram = phi @ phi.T
    try:
        correction = phi.T @ np.linalg.solve(gram, residual)
    except np.linalg.LinAlgError:
        return x_hat
    return quat.QVector(x_hat.components - shrink * correction)


def check_bounds(x, x_hat, s, delta_2s, eta):
    """Evaluate both stability inequalities for a reconstruction.

    lhs/rhs pairs are |x# - x|_1 <= C0 |x - x|s|_1 and
    |x# - x|_2 <= (C0/sqrt(s)) |x - x|s|_1 + C1 eta.
    """
    if len(x) != len(x_hat):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(x_hat)}")
    if s < 1 or s > len(x):
        raise SOutOfRange(f"s={s} outside [1, {len(x)}]")
    c0, c1 = theoretical_constants(delta_2s)
    tail = quat.lp_norm(x - quat.best_s_approx(x, s), 1)
    diff = x_hat - x
    lhs_l1 = quat.lp_norm(diff, 1)
    rhs_l1 = c0 * tail
    lhs_l2 = quat.lp_norm(diff, 2)
    rhs_l2 = c0 / math.sqrt(s) * tail + c1 * eta
    ok_l1 = lhs_l1 <= rhs_l1 + 1e-9 * (1.0 + rhs_l1)
    ok_l2 = lhs_l2 <= rhs_l2 + 1e-9 * (1.0 + rhs_l2)
    return BoundReport(
        s=s,
        delta_2s=delta_2s,
        eta=eta,
        C0=c0,
        C1=c1,
        lhs_l1=lhs_l1,
        rhs_l1=rhs_l1,
        lhs_l2=lhs_l2,
        rhs_l2=rhs_l2,
        satisfied=(ok_l1, ok_l2),
    )


def c0_ratios(x, x_hat, s):
    """Empirical lower bounds on C0 from one reconstruction at sparsity s.

    ratio_l1 = |x# - x|_1 / |x - x|s|_1 and
    ratio_l2 = sqrt(s) |x# - x|_2 / |x - x|s|_1.
    """
    if len(x) != len(x_hat):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(x_hat)}")
    if s < 1 or s > len(x):
        raise SOutOfRange(f"s={s} outside [1, {len(x)}]")
    denom = quat.lp_norm(x - quat.best_s_approx(x, s), 1)
    if denom <= 1e-12:
        raise DegenerateDenominator(
            f"x is effectively {s}-sparse (tail l1 norm {denom:.3e})")
    diff = x_hat - x
    ratio_l1 = quat.lp_norm(diff, 1) / denom
    ratio_l2 = math.sqrt(s) * quat.lp_norm(diff, 2) / denom
    return ratio_l1, ratio_l2
