"""Deterministic experiment drivers: the phase-transition grid and the
empirical lower-bound sweep for the stability constant.

Every trial derives its own seed from (base_seed, m, s, trial), so grids
are reproducible cell by cell, independent of execution order or thread
count.  Timing is recorded per trial as diagnostics but is the one field
exempt from byte-level reproducibility.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from . import recovery, sensing, socp
from .errors import DegenerateDenominator, QcsError, SOutOfRange, SolverFailure
from .quat import QVector
from .rng import GOLDEN_GAMMA, Xoshiro256StarStar, splitmix_finalize

__all__ = [
    "GAUSSIAN",
    "PARTIAL_ORTHOGONAL",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentGrid",
    "C0Row",
    "sparse_signal",
    "derive_trial_seed",
    "run_phase_transition",
    "run_c0_experiment",
    "write_results",
    "read_rates_csv",
    "read_trials_csv",
]

GAUSSIAN = "Gaussian"
PARTIAL_ORTHOGONAL = "PartialOrthogonal"

_MASK64 = (1 << 64) - 1

# Stream tags for deriving independent sub-seeds from one trial seed.
_MATRIX_STREAM = 1
_SIGNAL_STREAM = 2

# Solver settings for experiment trials: one order of magnitude tighter than
# the 1e-7 perfect-recovery threshold.  The library default (1e-9) is not
# reliably reachable with dense normal equations on every random instance,
# and the recovered point is feasibility-checked downstream regardless.
_TRIAL_SETTINGS = socp.SolverSettings(tol_gap=1e-8, tol_primal=1e-8,
                                      tol_dual=1e-8)


@dataclass
class ExperimentConfig:
    n: int
    m_values: list
    s_values: list
    trials: int
    base_seed: int
    eta: float = 0.0
    perfect_threshold: float = 1e-7
    matrix_kind: str = GAUSSIAN
    output_path: str = ""
    reuse_matrix: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(s < 1 or 2 * s > self.n for s in self.s_values):
            raise SOutOfRange("every s must satisfy 1 <= s <= n/2")
        if any(m < 1 or m > self.n for m in self.m_values):
            raise ValueError("every m must satisfy 1 <= m <= n")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.matrix_kind not in (GAUSSIAN, PARTIAL_ORTHOGONAL):
            raise ValueError(f"unknown matrix kind {self.matrix_kind!r}")

    def echo(self):
        """One-line deterministic description for CSV comment headers."""
        return (
            f"n={self.n}"
            f" m={','.join(str(m) for m in self.m_values)}"
            f" s={','.join(str(s) for s in self.s_values)}"
            f" trials={self.trials}"
            f" base_seed={self.base_seed}"
            f" eta={self.eta:.17g}"
            f" perfect_threshold={self.perfect_threshold:.17g}"
            f" matrix_kind={self.matrix_kind}"
            f" reuse_matrix={self.reuse_matrix}"
        )


@dataclass
class TrialRecord:
    m: int
    s: int
    trial_index: int
    seed: int
    error_l2: float
    error_l1: float
    perfect: bool
    solver_iters: int
    solver_status: str
    wall_millis: float


@dataclass
class ExperimentGrid:
    config: ExperimentConfig
    records: list
    rates: dict = field(default_factory=dict)


@dataclass(frozen=True)
class C0Row:
    s: int
    ratio_l1: float
    ratio_l2: float
    skipped: bool


def derive_trial_seed(base_seed, m, s, trial):
    """Mix (m, s, trial) into base_seed, SplitMix64-style.

    The indices pack into one 64-bit key (20 bits m, 20 bits s, 24 bits
    trial), get multiplied by the golden-ratio constant 0x9E3779B97F4A7C15,
    and the xor with base_seed is run through the SplitMix64 finalizer, so
    the map is injective in (m, s, trial) for any fixed base seed.
    """
    key = (int(m) & 0xFFFFF) | ((int(s) & 0xFFFFF) << 20) \
        | ((int(trial) & 0xFFFFFF) << 40)
    mixed = (int(base_seed) ^ ((key * GOLDEN_GAMMA) & _MASK64)) & _MASK64
    return splitmix_finalize((mixed + GOLDEN_GAMMA) & _MASK64)


def sparse_signal(n, s, seed):
    """An s-sparse quaternion vector with N(0,1) components on a random support.

    The support is a Fisher-Yates prefix draw; values are assigned to the
    support in increasing index order, four normals per entry.
    """
    if not 1 <= s <= n // 2:
        raise SOutOfRange(f"s={s} outside [1, n/2] for n={n}")
    rng = Xoshiro256StarStar(seed)
    support = sorted(rng.subset(n, s))
    data = np.zeros((n, 4))
    for idx in support:
        data[idx] = rng.normals(4)
    return QVector(data)


def _make_matrix(kind, m, n, seed):
    if kind == GAUSSIAN:
        return sensing.gaussian_matrix(m, n, seed)
    return sensing.partial_orthogonal_matrix(m, n, seed)


def _run_trial(config, m, s, trial, phi):
    trial_seed = derive_trial_seed(config.base_seed, m, s, trial)
    if phi is None:
        matrix_seed = derive_trial_seed(trial_seed, _MATRIX_STREAM, 0, 0)
        phi = _make_matrix(config.matrix_kind, m, config.n, matrix_seed)
    signal_seed = derive_trial_seed(trial_seed, _SIGNAL_STREAM, 0, 0)
    x = sparse_signal(config.n, s, signal_seed)
    y = sensing.apply(phi, x)
    start = perf_counter()
    try:
        result = recovery.recover(phi, y, config.eta, x_true=x,
                                  settings=_TRIAL_SETTINGS)
        error_l2 = result.error_l2
        error_l1 = result.error_l1
        status = result.solver.status
        iters = result.solver.iters
    except SolverFailure as exc:
        sol = exc.solution
        error_l2 = math.inf
        error_l1 = math.inf
        status = sol.status if sol is not None else "NumericalFailure"
        iters = sol.iters if sol is not None else 0
    except QcsError:
        error_l2 = math.inf
        error_l1 = math.inf
        status = "NumericalFailure"
        iters = 0
    wall = (perf_counter() - start) * 1000.0
    return TrialRecord(
        m=m,
        s=s,
        trial_index=trial,
        seed=trial_seed,
        error_l2=error_l2,
        error_l1=error_l1,
        perfect=error_l2 <= config.perfect_threshold,
        solver_iters=iters,
        solver_status=status,
        wall_millis=wall,
    )


def run_phase_transition(config, threads=1):
    """Run the full (m, s, trial) grid and aggregate perfect-recovery rates.

    A failed solve is recorded with infinite error (perfect=False) rather
    than aborting the grid.  Output is identical for any thread count.
    """
    fixed = {}
    if config.reuse_matrix:
        for m in config.m_values:
            anchor = derive_trial_seed(config.base_seed, m, 0, 0)
            matrix_seed = derive_trial_seed(anchor, _MATRIX_STREAM, 0, 0)
            fixed[m] = _make_matrix(config.matrix_kind, m, config.n, matrix_seed)
    jobs = [
        (m, s, trial)
        for m in config.m_values
        for s in config.s_values
        for trial in range(config.trials)
    ]
    records = [None] * len(jobs)
    if threads <= 1:
        for pos, (m, s, trial) in enumerate(jobs):
            records[pos] = _run_trial(config, m, s, trial, fixed.get(m))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                pool.submit(_run_trial, config, m, s, trial, fixed.get(m)): pos
                for pos, (m, s, trial) in enumerate(jobs)
            }
            for future, pos in futures.items():
                records[pos] = future.result()
    counts = {}
    for record in records:
        counts[(record.m, record.s)] = counts.get((record.m, record.s), 0) \
            + int(record.perfect)
    rates = {cell: counts.get(cell, 0) / config.trials
             for cell in ((m, s) for m in config.m_values for s in config.s_values)}
    return ExperimentGrid(config=config, records=records, rates=rates)


def run_c0_experiment(n, m, seed, s_values):
    """Recover one dense random quaternion signal and sweep the C0 ratios.

    The signal is not sparse, so the reconstruction error is nonzero and
    each sparsity level yields a valid lower bound on the stability
    constant; levels with a degenerate tail norm are marked skipped.
    """
    if any(s < 1 or 2 * s > n for s in s_values):
        raise SOutOfRange("every s must satisfy 1 <= s <= n/2")
    matrix_seed = derive_trial_seed(seed, _MATRIX_STREAM, 0, 0)
    phi = sensing.gaussian_matrix(m, n, matrix_seed)
    signal_seed = derive_trial_seed(seed, _SIGNAL_STREAM, 0, 0)
    rng = Xoshiro256StarStar(signal_seed)
    x = QVector(rng.normals(4 * n).reshape(n, 4))
    y = sensing.apply(phi, x)
    result = recovery.recover(phi, y, 0.0, settings=_TRIAL_SETTINGS)
    rows = []
    for s in s_values:
        try:
            ratio_l1, ratio_l2 = recovery.c0_ratios(x, result.x_hat, s)
            rows.append(C0Row(s=s, ratio_l1=ratio_l1, ratio_l2=ratio_l2,
                              skipped=False))
        except DegenerateDenominator:
            rows.append(C0Row(s=s, ratio_l1=math.nan, ratio_l2=math.nan,
                              skipped=True))
    return rows


# ---------------------------------------------------------------------------
# CSV persistence.  Three schemas: per-trial "phase", aggregated "rates",
# and the "c0" ratio table.  Floats carry 17 significant digits.


def _comment_line(config_echo):
    return f"# qcs {_version()} {config_echo}\n"


def _version():
    from . import __version__

    return __version__


def write_results(obj, path, schema=None):
    """Write an ExperimentGrid ("rates" or "phase" schema) or a C0 table."""
    if isinstance(obj, ExperimentGrid):
        schema = schema or "rates"
        if schema == "rates":
            _write_rates(obj, path)
        elif schema == "phase":
            _write_trials(obj, path)
        else:
            raise ValueError(f"unknown grid schema {schema!r}")
    else:
        _write_c0(obj, path, schema_echo=schema or "")


def _fmt(value):
    return f"{value:.17g}"


def _write_rates(grid, path):
    with open(path, "w", newline="") as fh:
        fh.write(_comment_line(grid.config.echo()))
        fh.write("m,s,rate\n")
        for m in grid.config.m_values:
            for s in grid.config.s_values:
                fh.write(f"{m},{s},{_fmt(grid.rates[(m, s)])}\n")


def _write_trials(grid, path):
    with open(path, "w", newline="") as fh:
        fh.write(_comment_line(grid.config.echo() + " (wall_millis is non-deterministic diagnostics)"))
        fh.write("m,s,trial,seed,error_l2,error_l1,perfect,iters,status,wall_millis\n")
        for r in grid.records:
            fh.write(
                f"{r.m},{r.s},{r.trial_index},{r.seed},{_fmt(r.error_l2)},"
                f"{_fmt(r.error_l1)},{int(r.perfect)},{r.solver_iters},"
                f"{r.solver_status},{_fmt(r.wall_millis)}\n")


def _write_c0(rows, path, schema_echo=""):
    with open(path, "w", newline="") as fh:
        fh.write(_comment_line(schema_echo or "c0 ratio table"))
        fh.write("s,ratio_l1,ratio_l2,skipped\n")
        for row in rows:
            fh.write(f"{row.s},{_fmt(row.ratio_l1)},{_fmt(row.ratio_l2)},"
                     f"{int(row.skipped)}\n")


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_rates_csv(path):
    """Read a rates CSV back into a {(m, s): rate} dict."""
    return {
        (int(row["m"]), int(row["s"])): float(row["rate"])
        for row in _read_csv_rows(path)
    }


def read_trials_csv(path):
    """Read a per-trial CSV back into TrialRecord objects."""
    records = []
    for row in _read_csv_rows(path):
        records.append(TrialRecord(
            m=int(row["m"]),
            s=int(row["s"]),
            trial_index=int(row["trial"]),
            seed=int(row["seed"]),
            error_l2=float(row["error_l2"]),
            error_l1=float(row["error_l1"]),
            perfect=bool(int(row["perfect"])),
            solver_iters=int(row["iters"]),
            solver_status=row["status"],
            wall_millis=float(row["wall_millis"]),
        ))
    return records
