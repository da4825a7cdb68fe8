"""Sparse quaternion signal recovery from real linear measurements.

The package provides exact quaternion vector algebra, measurement-matrix
generation with restricted-isometry diagnostics, an embedded second-order
cone solver, the l1-recovery pipeline with its error-bound constants, and
reproducible experiment drivers, all behind a single pinned random stream.
"""

from .quat import (
    Quaternion,
    QVector,
    ImaginaryUnitDecomposition,
    qmul,
    qconj,
    inner_product,
    lp_norm,
    imaginary_unit_decompose,
    polarization_i,
    polarization_ii,
    best_s_approx,
    read_signal,
    write_signal,
)
from .sensing import (
    RipEstimate,
    gaussian_matrix,
    partial_orthogonal_matrix,
    apply,
    rip_constant_exact,
    rip_constant_lower_bound,
    coherence,
    read_matrix,
    write_matrix,
)
from .socp import (
    ConeProgram,
    SolverSettings,
    Solution,
    build_noiseless,
    build_noisy,
    solve,
    extract_signal,
    kkt_report,
)
from .recovery import (
    RecoveryResult,
    BoundReport,
    theoretical_constants,
    recover,
    check_bounds,
    c0_ratios,
)
from .experiments import (
    ExperimentConfig,
    TrialRecord,
    ExperimentGrid,
    sparse_signal,
    run_phase_transition,
    run_c0_experiment,
    derive_trial_seed,
    write_results,
)
from . import errors

__version__ = "0.1.0"
