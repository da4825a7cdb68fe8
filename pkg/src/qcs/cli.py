"""Command-line frontend.

Subcommands cover matrix/signal generation, recovery, isometry-constant
estimation, both experiments, and a self-test gate.  All data travels
through files; standard error carries diagnostics and the resolved
configuration, and standard output stays silent except for the single-line
result of ``rip``.

Exit codes: 0 success, 1 usage error, 2 numerical/solver failure,
3 I/O or file-format error.
"""

import argparse
import math
import sys

import numpy as np

from . import __version__, experiments, quat, recovery, sensing, socp
from .errors import FormatError, QcsError
from .rng import Xoshiro256StarStar

__all__ = ["main", "run", "selftest"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(
        prog="qcs",
        description="Sparse quaternion signal recovery from real measurements.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser(
        "gen-matrix", help="generate a measurement matrix (QCSMAT v1)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--kind", choices=["gaussian", "partial-orthogonal"],
                   default="gaussian", help="matrix ensemble")
    p.add_argument("--m", type=int, required=True, help="number of rows")
    p.add_argument("--n", type=int, required=True, help="number of columns")
    p.add_argument("--seed", type=int, required=True, help="stream seed")
    p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser(
        "gen-signal", help="generate a sparse quaternion signal (QCSSIG v1)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--n", type=int, required=True, help="signal length")
    p.add_argument("--s", type=int, required=True, help="sparsity (<= n/2)")
    p.add_argument("--seed", type=int, required=True, help="stream seed")
    p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser(
        "recover", help="l1-minimal reconstruction from measurements",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--matrix", required=True, help="QCSMAT v1 file")
    p.add_argument("--obs", required=True, help="QCSSIG v1 observation file")
    p.add_argument("--eta", type=float, default=0.0, help="noise radius")
    p.add_argument("--out", required=True, help="output signal path")
    p.add_argument("--truth", default=None,
                   help="optional ground-truth signal for error reporting")

    p = sub.add_parser(
        "rip", help="estimate a restricted isometry constant",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--matrix", required=True, help="QCSMAT v1 file")
    p.add_argument("--s", type=int, required=True, help="sparsity level")
    p.add_argument("--exact", action="store_true",
                   help="brute-force enumeration (default mode)")
    p.add_argument("--trials", type=int, default=0,
                   help="randomized lower bound with this many trials")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the randomized bound")
    p.add_argument("--coherence", action="store_true",
                   help="column coherence (upper bound for delta_2 with unit columns)")
    p.add_argument("--cap", type=int, default=sensing.DEFAULT_SUPPORT_CAP,
                   help="support-enumeration cap for --exact")

    p = sub.add_parser(
        "phase", help="perfect-recovery phase-transition grid",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--n", type=int, default=128, help="signal length")
    p.add_argument("--m", default="32",
                   help="comma-separated measurement counts")
    p.add_argument("--s-max", type=int, default=16, help="sparsities 1..s-max")
    p.add_argument("--trials", type=int, default=100, help="trials per cell")
    p.add_argument("--seed", type=int, required=True, help="base seed")
    p.add_argument("--eta", type=float, default=0.0, help="noise radius")
    p.add_argument("--matrix-kind", choices=["gaussian", "partial-orthogonal"],
                   default="gaussian", help="matrix ensemble")
    p.add_argument("--reuse-matrix", action="store_true",
                   help="fix one matrix per m instead of one per trial")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--out", required=True, help="rates CSV path")
    p.add_argument("--records", default=None,
                   help="optional per-trial CSV path (includes wall times)")

    p = sub.add_parser(
        "c0", help="empirical lower bound sweep for the stability constant",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--n", type=int, default=256, help="signal length")
    p.add_argument("--m", type=int, default=32, help="measurement count")
    p.add_argument("--seed", type=int, required=True, help="base seed")
    p.add_argument("--s-max", type=int, default=128, help="sparsities 1..s-max")
    p.add_argument("--out", required=True, help="c0 CSV path")

    sub.add_parser(
        "selftest", help="run the built-in verification checks",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    return parser


def _echo_config(args):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    print(f"qcs {__version__} {args.command}: "
          + " ".join(f"{k}={v}" for k, v in resolved.items()), file=sys.stderr)


_KIND_MAP = {
    "gaussian": experiments.GAUSSIAN,
    "partial-orthogonal": experiments.PARTIAL_ORTHOGONAL,
}


def _cmd_gen_matrix(args):
    if args.kind == "gaussian":
        phi = sensing.gaussian_matrix(args.m, args.n, args.seed)
    else:
        phi = sensing.partial_orthogonal_matrix(args.m, args.n, args.seed)
    sensing.write_matrix(phi, args.out)
    print(f"wrote {args.m}x{args.n} {args.kind} matrix to {args.out}",
          file=sys.stderr)
    return 0


def _cmd_gen_signal(args):
    x = experiments.sparse_signal(args.n, args.s, args.seed)
    quat.write_signal(x, args.out)
    print(f"wrote {args.s}-sparse signal of length {args.n} to {args.out}",
          file=sys.stderr)
    return 0


def _cmd_recover(args):
    phi = sensing.read_matrix(args.matrix)
    y = quat.read_signal(args.obs)
    truth = quat.read_signal(args.truth) if args.truth else None
    result = recovery.recover(phi, y, args.eta, x_true=truth)
    quat.write_signal(result.x_hat, args.out)
    print(f"status={result.solver.status} iters={result.solver.iters} "
          f"l1_objective={result.l1_objective:.17g}", file=sys.stderr)
    if truth is not None:
        print(f"error_l2={result.error_l2:.17g} error_l1={result.error_l1:.17g}",
              file=sys.stderr)
    return 0


def _cmd_rip(args):
    phi = sensing.read_matrix(args.matrix)
    if args.coherence:
        estimate = sensing.RipEstimate(
            s=args.s, value=sensing.coherence(phi),
            method=sensing.COHERENCE_UPPER_BOUND)
    elif args.trials > 0:
        estimate = sensing.rip_constant_lower_bound(
            phi, args.s, args.trials, args.seed)
    else:
        estimate = sensing.rip_constant_exact(phi, args.s, support_cap=args.cap)
    print(f"method={estimate.method} trials={estimate.trials}", file=sys.stderr)
    print(f"delta_s={estimate.value:.17g}")
    return 0


def _parse_int_list(text):
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise _UsageError(f"bad integer list {text!r}") from exc
    if not values:
        raise _UsageError("empty integer list")
    return values


def _cmd_phase(args):
    config = experiments.ExperimentConfig(
        n=args.n,
        m_values=_parse_int_list(args.m),
        s_values=list(range(1, args.s_max + 1)),
        trials=args.trials,
        base_seed=args.seed,
        eta=args.eta,
        matrix_kind=_KIND_MAP[args.matrix_kind],
        output_path=args.out,
        reuse_matrix=args.reuse_matrix,
    )
    grid = experiments.run_phase_transition(config, threads=args.threads)
    experiments.write_results(grid, args.out, schema="rates")
    if args.records:
        experiments.write_results(grid, args.records, schema="phase")
    worst = min(grid.rates.values())
    print(f"wrote rates for {len(grid.rates)} cells to {args.out} "
          f"(worst cell rate {worst:.3f})", file=sys.stderr)
    return 0


def _cmd_c0(args):
    rows = experiments.run_c0_experiment(
        args.n, args.m, args.seed, list(range(1, args.s_max + 1)))
    echo = (f"n={args.n} m={args.m} seed={args.seed} s=1..{args.s_max}"
            f" (c0 ratio table)")
    experiments.write_results(rows, args.out, schema=echo)
    finite = [max(r.ratio_l1, r.ratio_l2) for r in rows if not r.skipped]
    print(f"wrote {len(rows)} rows to {args.out} "
          f"(max ratio {max(finite):.6f})", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Self-test checks.  Each returns None on success or a failure description.


def _rand_quaternion(rng):
    return quat.Quaternion(rng.normal(), rng.normal(), rng.normal(),
                           rng.normal())


def _rand_qvector(rng, n):
    return quat.QVector(rng.normals(4 * n).reshape(n, 4))


def _check_algebra_identities():
    rng = Xoshiro256StarStar(101)
    i, j, k = quat.I, quat.J, quat.K
    for _ in range(10_000):
        q = _rand_quaternion(rng)
        w = _rand_quaternion(rng)
        v = _rand_quaternion(rng)
        assoc = quat.qmul(quat.qmul(q, w), v) - quat.qmul(q, quat.qmul(w, v))
        if abs(assoc) > 1e-12 * (1.0 + abs(q) * abs(w) * abs(v)):
            return f"associativity off by {abs(assoc):.3e}"
        prod = quat.qmul(q, w)
        if abs(abs(prod) - abs(q) * abs(w)) > 1e-12 * (1.0 + abs(q) * abs(w)):
            return "norm multiplicativity violated"
        anti = quat.qconj(prod) - quat.qmul(quat.qconj(w), quat.qconj(q))
        if abs(anti) > 1e-12 * (1.0 + abs(q) * abs(w)):
            return "conjugation anti-homomorphism violated"
        rebuilt = (q + quat.qmul(quat.qmul(i, q), i)
                   + quat.qmul(quat.qmul(j, q), j)
                   + quat.qmul(quat.qmul(k, q), k)) * -0.5
        if abs(rebuilt - quat.qconj(q)) > 1e-12 * (1.0 + abs(q)):
            return "conjugate reconstruction formula violated"
    return None


def _check_cauchy_schwarz():
    rng = Xoshiro256StarStar(202)
    for _ in range(10_000):
        x = _rand_qvector(rng, 4)
        y = _rand_qvector(rng, 4)
        lhs = abs(quat.inner_product(x, y))
        bound = quat.lp_norm(x, 2) * quat.lp_norm(y, 2)
        if lhs > bound * (1.0 + 1e-12):
            return f"|<x,y>| = {lhs:.6e} exceeds {bound:.6e}"
    return None


def _check_polarization_agreement():
    rng = Xoshiro256StarStar(303)
    for _ in range(1_000):
        x = _rand_qvector(rng, 16)
        y = _rand_qvector(rng, 16)
        ip = quat.inner_product(x, y)
        tol = 1e-10 * max(1.0, abs(ip))
        if abs(quat.polarization_i(x, y) - ip) > tol:
            return "four-term polarization disagrees with the inner product"
        if abs(quat.polarization_ii(x, y) - ip) > tol:
            return "two-term polarization disagrees with the inner product"
    return None


def _check_u_representation():
    rng = Xoshiro256StarStar(404)
    for _ in range(10_000):
        q = _rand_quaternion(rng)
        dec = quat.imaginary_unit_decompose(q)
        u = dec.u
        sandwich = quat.qmul(quat.qmul(quat.qconj(u), q), u)
        if abs(sandwich - q) > 1e-12 * (1.0 + abs(q)):
            return "u-conjugation does not fix q"
        if abs(dec.reassemble() - q) > 1e-12 * (1.0 + abs(q)):
            return "decomposition does not reassemble"
    return None


def _check_rip_quaternion_extension():
    phi = sensing.gaussian_matrix(8, 12, seed=2024)
    delta2 = sensing.rip_constant_exact(phi, 2).value
    rng = Xoshiro256StarStar(505)
    for _ in range(10_000):
        support = rng.subset(12, 2)
        values = rng.normals(8).reshape(2, 4)
        norm_sq = float((values ** 2).sum())
        image = phi[:, support] @ values
        image_sq = float((image ** 2).sum())
        if image_sq > (1.0 + delta2) * norm_sq + 1e-10 \
                or image_sq < (1.0 - delta2) * norm_sq - 1e-10:
            return "a 2-sparse quaternion vector violates the isometry bounds"
    return None


def _check_rip_disjoint_inner_product():
    phi = sensing.gaussian_matrix(8, 10, seed=808)
    delta2 = sensing.rip_constant_exact(phi, 2).value
    rng = Xoshiro256StarStar(606)
    for _ in range(10_000):
        pair = rng.subset(10, 2)
        qx = _rand_quaternion(rng)
        qy = _rand_quaternion(rng)
        fx = quat.QVector(np.outer(phi[:, pair[0]], qx.as_array()))
        fy = quat.QVector(np.outer(phi[:, pair[1]], qy.as_array()))
        lhs = abs(quat.inner_product(fx, fy))
        bound = math.sqrt(2.0) * delta2 * abs(qx) * abs(qy) + 1e-10
        if lhs > bound:
            return f"disjoint-support bound violated: {lhs:.6e} > {bound:.6e}"
    return None


def _check_socp_epigraph():
    prog = socp.ConeProgram(
        c=[1.0, 0.0, 0.0],
        A=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        b=[3.0, 4.0],
        cone_dims=[3],
    )
    sol = socp.solve(prog)
    if sol.status != socp.OPTIMAL:
        return f"epigraph program ended {sol.status}"
    if abs(sol.objective - 5.0) > 1e-8:
        return f"objective {sol.objective!r} != 5"
    res = socp.kkt_report(prog, sol)
    if max(res.primal, res.dual, res.gap) > 1e-8:
        return "KKT residuals too large"
    return None


def _check_recovery_identity():
    phi = np.eye(3)
    y = quat.QVector([[0, 2, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    result = recovery.recover(phi, y, 0.0)
    if quat.lp_norm(result.x_hat - y, 2) > 1e-7:
        return "identity-matrix recovery missed the unique feasible point"
    return None


_SELFTEST_CHECKS = [
    ("algebra-identities", _check_algebra_identities),
    ("cauchy-schwarz", _check_cauchy_schwarz),
    ("polarization-agreement", _check_polarization_agreement),
    ("u-representation", _check_u_representation),
    ("rip-quaternion-extension", _check_rip_quaternion_extension),
    ("rip-disjoint-inner-product", _check_rip_disjoint_inner_product),
    ("socp-epigraph", _check_socp_epigraph),
    ("recovery-identity", _check_recovery_identity),
]


def selftest():
    """Run every built-in check; returns 0 iff all pass (2 otherwise)."""
    failed = None
    for name, check in _SELFTEST_CHECKS:
        try:
            problem = check()
        except Exception as exc:  # a crash counts as a failure
            problem = f"raised {type(exc).__name__}: {exc}"
        if problem is None:
            print(f"[pass] {name}", file=sys.stderr)
        else:
            print(f"[FAIL] {name}: {problem}", file=sys.stderr)
            if failed is None:
                failed = name
    if failed is not None:
        print(f"selftest failed at check: {failed}", file=sys.stderr)
        return 2
    print(f"selftest passed ({len(_SELFTEST_CHECKS)} checks)", file=sys.stderr)
    return 0


_COMMANDS = {
    "gen-matrix": _cmd_gen_matrix,
    "gen-signal": _cmd_gen_signal,
    "recover": _cmd_recover,
    "rip": _cmd_rip,
    "phase": _cmd_phase,
    "c0": _cmd_c0,
}


def main(argv):
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    if args.command == "selftest":
        _echo_config(args)
        return selftest()
    _echo_config(args)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except QcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run():
    sys.exit(main(sys.argv[1:]))
