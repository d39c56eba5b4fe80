"""Seeded Gaussian sampling and Monte Carlo benchmark runners.

Every replication draws from a counter-based stream keyed by a hash of
(seed, N, r), so result tables are bit-identical regardless of evaluation
order, parallelism, or which estimators are requested.  Worker
parallelism is capped by the NESTCOV_THREADS environment variable
(0 or unset means auto).
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NestcovError, ShapeMismatch
from .estimators import (
    diagonal_mle,
    fit_decay2,
    fit_decay3,
    fit_gmrf,
    sample_covariance,
    sufficient_stats,
)
from .models import (
    DecayModel,
    NeighborLevel,
    SampleSet,
    SpdMatrix,
    decay_diagonal,
    gmrf_structure,
    laplace_eigenvalues,
    precision_assemble,
)
from .regularizers import DEFAULT_CV_FOLDS, DEFAULT_KAPPA_GRID, cond_reg_cv, ledoit_wolf

__all__ = [
    "ExperimentKind",
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentTable",
    "replication_seed",
    "gaussian_sample",
    "frobenius_error",
    "aggregate",
    "run_diag_experiment",
    "run_gmrf_experiment",
    "run_shrinkage_comparison",
    "diag_truth",
    "DIAG_ESTIMATORS",
    "GMRF_ESTIMATORS",
    "SHRINK_ESTIMATORS",
    "DEFAULT_DIAG_TRUTH",
    "DEFAULT_GMRF_TRUTH",
    "DEFAULT_DIAG_SIZES",
    "DEFAULT_GMRF_SIZES",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF

DIAG_ESTIMATORS = ("sample", "diag", "diag_mle", "decay3", "decay2")
GMRF_ESTIMATORS = ("sample", "gmrf4", "gmrf8", "gmrf12")
SHRINK_ESTIMATORS = ("sample", "diag", "decay2", "ledoit_wolf", "cond_reg")

DEFAULT_DIAG_TRUTH = (30.0, 0.002)
DEFAULT_GMRF_TRUTH = (5.0, -0.2, 0.5)
DEFAULT_DIAG_SIZES = tuple(range(5, 21))
DEFAULT_GMRF_SIZES = tuple(range(10, 56, 5))


class ExperimentKind(enum.Enum):
    DIAG_DECAY = "diag-decay"
    GMRF = "gmrf"
    SHRINK_COMPARE = "shrink-compare"


_DEFAULT_ESTIMATORS = {
    ExperimentKind.DIAG_DECAY: DIAG_ESTIMATORS,
    ExperimentKind.GMRF: GMRF_ESTIMATORS,
    ExperimentKind.SHRINK_COMPARE: SHRINK_ESTIMATORS,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully determines one benchmark run (together with nothing else)."""

    kind: ExperimentKind
    grid: tuple[int, int] = (10, 10)
    truth_params: tuple[float, ...] = ()
    sample_sizes: tuple[int, ...] = ()
    replications: int = 50
    seed: int = 0
    estimator_set: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.truth_params:
            default = (
                DEFAULT_GMRF_TRUTH if self.kind is ExperimentKind.GMRF else DEFAULT_DIAG_TRUTH
            )
            object.__setattr__(self, "truth_params", default)
        if not self.sample_sizes:
            default = (
                DEFAULT_GMRF_SIZES if self.kind is ExperimentKind.GMRF else DEFAULT_DIAG_SIZES
            )
            object.__setattr__(self, "sample_sizes", default)
        if not self.estimator_set:
            object.__setattr__(self, "estimator_set", _DEFAULT_ESTIMATORS[self.kind])
        object.__setattr__(self, "grid", (int(self.grid[0]), int(self.grid[1])))
        object.__setattr__(self, "truth_params", tuple(float(t) for t in self.truth_params))
        object.__setattr__(self, "sample_sizes", tuple(int(v) for v in self.sample_sizes))
        object.__setattr__(self, "estimator_set", tuple(str(e) for e in self.estimator_set))
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ValueError("grid dimensions must be positive")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        sizes = self.sample_sizes
        if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
            raise ValueError("sample_sizes must be positive and strictly increasing")
        expected_len = 3 if self.kind is ExperimentKind.GMRF else 2
        if len(self.truth_params) != expected_len:
            raise ValueError(
                f"{self.kind.value} truth needs {expected_len} parameters, got {len(self.truth_params)}"
            )
        known = set(_DEFAULT_ESTIMATORS[self.kind])
        unknown = [e for e in self.estimator_set if e not in known]
        if unknown:
            raise ValueError(f"unknown estimator tags for {self.kind.value}: {unknown}")


@dataclass(frozen=True)
class ExperimentRow:
    estimator: str
    N: int
    mean_sq_frobenius: float
    std_error: float
    replications: int
    failures: int = 0


@dataclass(frozen=True)
class ExperimentTable:
    """Aggregated squared-Frobenius errors, one row per (estimator, N)."""

    rows: tuple[ExperimentRow, ...]

    def __post_init__(self):
        keys = [(r.estimator, r.N) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (estimator, N) rows")
        for r in self.rows:
            if math.isfinite(r.std_error) and r.std_error < 0:
                raise ValueError("std_error must be non-negative")

    def row(self, estimator: str, N: int) -> ExperimentRow:
        for r in self.rows:
            if r.estimator == estimator and r.N == N:
                return r
        raise KeyError((estimator, N))

    def series(self, estimator: str) -> list[tuple[int, float]]:
        """(N, mean) pairs for one estimator, sorted by N."""
        pts = [(r.N, r.mean_sq_frobenius) for r in self.rows if r.estimator == estimator]
        return sorted(pts)

    @property
    def estimators(self) -> tuple[str, ...]:
        return tuple(sorted({r.estimator for r in self.rows}))


def replication_seed(seed: int, N: int, r: int) -> int:
    """Derive the 64-bit stream key for replication r at sample size N."""
    ss = np.random.SeedSequence([seed & _MASK64, int(N), int(r)])
    return int(ss.generate_state(1, np.uint64)[0])


def gaussian_sample(cov: SpdMatrix, N: int, stream_seed: int) -> SampleSet:
    """Draw N columns from N(0, cov) using a counter-based Philox stream.

    Columns are L @ Z with L the covariance's Cholesky certificate and Z
    standard normal; identical seeds give identical bits.
    """
    if N < 1:
        raise ValueError("sample size must be positive")
    if cov.pd_certificate is None:
        cov = SpdMatrix.certified(cov.values)
    L = cov.pd_certificate
    rng = np.random.Generator(np.random.Philox(key=stream_seed & _MASK64))
    Z = rng.standard_normal((cov.n, N))
    return SampleSet(data=L @ Z, seed=stream_seed & _MASK64)


def frobenius_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Squared Frobenius norm of the difference between two matrices."""
    A = np.asarray(estimate, dtype=float)
    B = np.asarray(truth, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatch(f"shapes {A.shape} and {B.shape} differ")
    d = A - B
    return float(np.sum(d * d))


def aggregate(errors) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(count)) of a sequence."""
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise EmptyInput("cannot aggregate an empty error list")
    if e.size == 1:
        return float(e[0]), 0.0
    return float(e.mean()), float(e.std(ddof=1) / math.sqrt(e.size))


def _thread_count() -> int:
    raw = os.environ.get("NESTCOV_THREADS", "0")
    try:
        v = int(raw)
    except ValueError:
        v = 0
    if v <= 0:
        v = os.cpu_count() or 1
    return v


def _run_replications(config: ExperimentConfig, one_replication) -> ExperimentTable:
    """Evaluate one_replication(N, r) -> {tag: error | None} over the grid.

    Reduction is keyed by (estimator, N) with replications consumed in
    index order, so the table does not depend on scheduling.
    """
    tasks = [(N, r) for N in config.sample_sizes for r in range(config.replications)]
    workers = _thread_count()
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda t: one_replication(*t), tasks))
    else:
        outcomes = [one_replication(N, r) for N, r in tasks]

    by_task = dict(zip(tasks, outcomes))
    rows = []
    for tag in config.estimator_set:
        for N in config.sample_sizes:
            errs = [by_task[(N, r)][tag] for r in range(config.replications)]
            ok = [e for e in errs if e is not None]
            failures = len(errs) - len(ok)
            if ok:
                mean, se = aggregate(ok)
            else:
                mean, se = math.nan, math.nan
            rows.append(
                ExperimentRow(
                    estimator=tag,
                    N=N,
                    mean_sq_frobenius=mean,
                    std_error=se,
                    replications=len(ok),
                    failures=failures,
                )
            )
    return ExperimentTable(rows=tuple(rows))


def diag_truth(config: ExperimentConfig):
    """Truth objects for a decay configuration: (model2, model3, diagonal)."""
    lam = laplace_eigenvalues(*config.grid)
    c, alpha = config.truth_params
    model2 = DecayModel.two_param(lam, c, alpha)
    truth = decay_diagonal(model2)
    return model2, DecayModel.three_param(lam, c, 0.0, alpha), truth


def _diag_errors(tags, s: SampleSet, truth_d: np.ndarray, model2, model3):
    sigma = sample_covariance(s)
    stats = sufficient_stats(s)
    out: dict[str, float | None] = {}
    for tag in tags:
        try:
            if tag == "sample":
                err = frobenius_error(sigma, np.diag(truth_d))
            elif tag == "diag":
                err = float(np.sum((np.diag(sigma) - truth_d) ** 2))
            elif tag == "diag_mle":
                err = float(np.sum((diagonal_mle(stats).d - truth_d) ** 2))
            elif tag == "decay3":
                rep = fit_decay3(stats, model3)
                d_hat = decay_diagonal(model3.with_params(rep.params)).d
                err = float(np.sum((d_hat - truth_d) ** 2))
            elif tag == "decay2":
                rep = fit_decay2(stats, model2)
                d_hat = decay_diagonal(model2.with_params(rep.params)).d
                err = float(np.sum((d_hat - truth_d) ** 2))
            elif tag == "ledoit_wolf":
                err = frobenius_error(ledoit_wolf(s).estimate.values, np.diag(truth_d))
            elif tag == "cond_reg":
                err = frobenius_error(cond_reg_cv(s).estimate.values, np.diag(truth_d))
            else:
                raise ValueError(f"unknown estimator tag {tag!r}")
            out[tag] = err
        except NestcovError:
            out[tag] = None
    return out


def run_diag_experiment(config: ExperimentConfig) -> ExperimentTable:
    """Error benchmark of the nested diagonal estimators.

    Truth is the two-parameter decay diagonal on the configured grid; for
    each N and replication the sample covariance, its diagonal, the free
    diagonal MLE, and the three- and two-parameter decay MLEs are scored
    by squared Frobenius distance to the truth.
    """
    if config.kind is not ExperimentKind.DIAG_DECAY:
        raise ValueError("config.kind must be diag-decay")
    model2, model3, truth = diag_truth(config)
    cov = truth.as_spd()
    d = truth.d

    def one(N, r):
        s = gaussian_sample(cov, N, replication_seed(config.seed, N, r))
        return _diag_errors(config.estimator_set, s, d, model2, model3)

    return _run_replications(config, one)


def run_shrinkage_comparison(config: ExperimentConfig) -> ExperimentTable:
    """Same pipeline as run_diag_experiment with the regularizer baselines."""
    if config.kind is not ExperimentKind.SHRINK_COMPARE:
        raise ValueError("config.kind must be shrink-compare")
    model2, model3, truth = diag_truth(config)
    cov = truth.as_spd()
    d = truth.d

    def one(N, r):
        s = gaussian_sample(cov, N, replication_seed(config.seed, N, r))
        return _diag_errors(config.estimator_set, s, d, model2, model3)

    return _run_replications(config, one)


_GMRF_LEVELS = {
    "gmrf4": NeighborLevel.N4,
    "gmrf8": NeighborLevel.N8,
    "gmrf12": NeighborLevel.N12,
}


def run_gmrf_experiment(config: ExperimentConfig, domain: str = "covariance") -> ExperimentTable:
    """Error benchmark of the banded-precision MLEs against the sample covariance.

    Truth is the 4-neighbor precision with the configured theta; fits with
    4, 8 and 12 neighbors are compared, by default in the covariance
    domain.  Pass domain="precision" to score P(theta_hat) against the
    true precision instead (the sample-covariance row then inverts the
    sample covariance and records a failure when it is singular).
    """
    if config.kind is not ExperimentKind.GMRF:
        raise ValueError("config.kind must be gmrf")
    if domain not in ("covariance", "precision"):
        raise ValueError("domain must be 'covariance' or 'precision'")
    m, k = config.grid
    structures = {tag: gmrf_structure(m, k, lvl) for tag, lvl in _GMRF_LEVELS.items()}
    truth_struct = structures.get("gmrf4", gmrf_structure(m, k, NeighborLevel.N4))
    P_true = precision_assemble(truth_struct, np.array(config.truth_params))
    cov_values = np.linalg.inv(P_true.values)
    cov_values = 0.5 * (cov_values + cov_values.T)
    cov = SpdMatrix.certified(cov_values)
    target = P_true.values if domain == "precision" else cov.values

    def one(N, r):
        s = gaussian_sample(cov, N, replication_seed(config.seed, N, r))
        sigma = sample_covariance(s)
        out: dict[str, float | None] = {}
        for tag in config.estimator_set:
            try:
                if tag == "sample":
                    if domain == "covariance":
                        est = sigma
                    else:
                        try:
                            est = np.linalg.inv(sigma)
                        except np.linalg.LinAlgError as exc:
                            raise NestcovError("singular sample covariance") from exc
                else:
                    struct = structures[tag]
                    rep = fit_gmrf(sigma, struct)
                    P_hat = precision_assemble(struct, rep.params)
                    if domain == "precision":
                        est = P_hat.values
                    else:
                        est = np.linalg.inv(P_hat.values)
                out[tag] = frobenius_error(est, target)
            except NestcovError:
                out[tag] = None
        return out

    return _run_replications(config, one)
