"""Nested maximum-likelihood covariance estimation.

A library and benchmark CLI for covariance models ordered by inclusion:
the unconstrained sample covariance, the free diagonal MLE, two- and
three-parameter spectral decay laws on a discrete-Laplacian eigenbasis,
and banded-precision grid Markov random fields, together with their
Fisher-information asymptotics and two regularized baselines.
"""

from .config import config_from_json, parse_config, serialize_config
from .errors import *  # noqa: F401,F403 -- the error taxonomy is part of the API
from .estimators import (
    FitReport,
    SufficientStats,
    diagonal_mle,
    fit_decay2,
    fit_decay3,
    fit_gmrf,
    decay_score3,
    gmrf_hessian,
    gmrf_loglik,
    gmrf_score,
    loglik_diagonal,
    sample_covariance,
    sufficient_stats,
    unbiased_sample_covariance,
)
from .fisher import (
    FisherInfo,
    ProjectedCov,
    asymptotic_mse,
    decay_jacobian,
    decay3_asymptotic_cov,
    fisher_decay2,
    fisher_decay3,
    fisher_diag,
    fisher_gmrf,
    projected_cov,
    psd_order_check,
)
from .models import (
    DecayFamily,
    DecayModel,
    DiagonalCovariance,
    GmrfStructure,
    NeighborLevel,
    SampleSet,
    SpdMatrix,
    decay_diagonal,
    gmrf_structure,
    laplace_eigenvalues,
    precision_assemble,
)
from .regularizers import CondRegResult, ShrinkageResult, cond_reg_cv, cond_reg_solve, ledoit_wolf
from .report import emit_csv, emit_svg_plot, fisher_trace_report, read_csv_table, render_png
from .simulation import (
    ExperimentConfig,
    ExperimentKind,
    ExperimentRow,
    ExperimentTable,
    aggregate,
    frobenius_error,
    gaussian_sample,
    replication_seed,
    run_diag_experiment,
    run_gmrf_experiment,
    run_shrinkage_comparison,
)

__version__ = "0.1.0"
