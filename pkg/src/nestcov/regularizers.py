"""Regularized covariance estimators used as baselines.

Two estimators: shrinkage of the sample covariance toward a scaled
identity with a data-driven weight, and the restricted MLE over
covariances whose condition number is bounded, with the bound chosen by
K-fold cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, FoldTooSmall, NotPositiveDefinite, SampleTooSmall
from .estimators import sample_covariance
from .models import SampleSet, SpdMatrix

__all__ = [
    "ShrinkageResult",
    "CondRegResult",
    "ledoit_wolf",
    "cond_reg_solve",
    "cond_reg_cv",
    "DEFAULT_KAPPA_GRID",
    "DEFAULT_CV_FOLDS",
]

DEFAULT_KAPPA_GRID = (1.0, 2.0, 5.0, 10.0, 30.0, 100.0, 1000.0)
DEFAULT_CV_FOLDS = 5


@dataclass(frozen=True)
class ShrinkageResult:
    """Convex combination gamma * Sigma_hat + (1-gamma) * mu * I."""

    estimate: SpdMatrix
    gamma: float
    target_scale: float


@dataclass(frozen=True)
class CondRegResult:
    """Condition-number-regularized estimate with its cross-validation trace.

    The estimate shares eigenvectors with the sample covariance; its
    eigenvalues are the sample eigenvalues clipped to [tau, kappa*tau].
    cv_scores holds (kappa, mean held-out log-likelihood) pairs.
    """

    estimate: SpdMatrix
    kappa: float
    tau: float
    cv_scores: tuple[tuple[float, float], ...]


def ledoit_wolf(s: SampleSet) -> ShrinkageResult:
    """Shrink the sample covariance toward mu*I with the optimal weight.

    With mu = Tr(S)/n, dispersion d2 = |S - mu I|_F^2 / n and noise level
    b2 = min(mean_k |X_k X_k^T - S|_F^2 / (N^2 n), d2), the weight is
    gamma = 1 - b2/d2 (gamma = 0 when the sample covariance is already
    spherical).  The estimate is positive definite whenever gamma < 1.
    """
    if s.N < 2:
        raise SampleTooSmall("shrinkage weight needs at least 2 samples")
    X = s.data
    if not np.any(X):
        raise DegenerateSample("all observations are zero")
    n, N = s.n, s.N
    S = sample_covariance(s)
    mu = float(np.trace(S)) / n
    centered = S - mu * np.eye(n)
    d2 = float(np.sum(centered * centered)) / n
    # |x x^T - S|_F^2 = |x|^4 - 2 x^T S x + |S|_F^2, vectorized over columns.
    q = np.einsum("ik,ik->k", X, X)
    cross = np.einsum("ik,ij,jk->k", X, S, X)
    s_frob2 = float(np.sum(S * S))
    beta_bar2 = float(np.sum(q * q - 2.0 * cross + s_frob2)) / (N * N * n)
    if d2 == 0.0:
        gamma = 0.0
    else:
        gamma = 1.0 - min(beta_bar2, d2) / d2
    values = gamma * S + (1.0 - gamma) * mu * np.eye(n)
    try:
        estimate = SpdMatrix.certified(values)
    except NotPositiveDefinite:
        estimate = SpdMatrix(values=values)  # gamma == 1 keeps a singular sample covariance
    return ShrinkageResult(estimate=estimate, gamma=gamma, target_scale=mu)


def _golden_max(func, lo: float, hi: float, iters: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iters):
        if (b - a) <= 1e-14 * max(1.0, abs(a), abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    return 0.5 * (a + b)


def cond_reg_solve(sample_eigs, kappa: float) -> tuple[float, np.ndarray]:
    """Restricted MLE eigenvalues under a condition-number bound.

    Given the sample eigenvalues l (descending, non-negative, at least one
    positive), returns (tau, clip(l, tau, kappa*tau)) where tau maximizes
    the restricted log-likelihood sum_i [-log m_i - l_i/m_i] with
    m_i = clip(l_i, tau, kappa*tau).  The maximization is a 1-D
    golden-section search on [l_min/kappa, l_max]; if the condition number
    of l is already within kappa, the input is returned unchanged with
    tau = l_min.
    """
    l = np.asarray(sample_eigs, dtype=float)
    if l.ndim != 1 or l.size < 1:
        raise ValueError("sample_eigs must be a non-empty vector")
    if np.any(np.diff(l) > 0) or np.any(l < 0):
        raise ValueError("sample_eigs must be non-negative and sorted descending")
    if not l[0] > 0:
        raise ValueError("at least one eigenvalue must be positive")
    if kappa < 1.0:
        raise ValueError("kappa must be at least 1")
    lmax, lmin = float(l[0]), float(l[-1])
    if lmin > 0 and lmax / lmin <= kappa:
        return lmin, l.copy()

    def restricted_loglik(tau: float) -> float:
        m = np.clip(l, tau, kappa * tau)
        return float(np.sum(-np.log(m) - l / m))

    tau = _golden_max(restricted_loglik, lmin / kappa, lmax)
    return tau, np.clip(l, tau, kappa * tau)


def _descending_eigh(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    return np.maximum(vals[order], 0.0), vecs[:, order]


def cond_reg_cv(s: SampleSet, kappa_grid=DEFAULT_KAPPA_GRID, K: int = DEFAULT_CV_FOLDS) -> CondRegResult:
    """Condition-number-regularized MLE with the bound selected by K-fold CV.

    Columns are shuffled once (seeded by the sample's own seed, 0 when
    absent) and split into K contiguous folds.  For each candidate kappa
    the restricted MLE is fit on each training fold and scored by the mean
    Gaussian log-likelihood of the held-out columns; the kappa with the
    highest mean score wins, ties going to the smaller kappa.  The final
    estimate is refit on the full sample.
    """
    grid = [float(k) for k in kappa_grid]
    if len(grid) == 0:
        raise ValueError("kappa_grid must be non-empty")
    if any(k < 1.0 for k in grid):
        raise ValueError("every kappa must be at least 1")
    if not (2 <= K <= s.N):
        raise ValueError("need N >= K >= 2")
    X = s.data
    n, N = s.n, s.N

    rng = np.random.default_rng((s.seed or 0) & 0xFFFFFFFFFFFFFFFF)
    perm = rng.permutation(N)
    folds = np.array_split(perm, K)

    log2pi = math.log(2.0 * math.pi)
    totals = np.zeros(len(grid))
    for i, fold in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        Xtr = X[:, train]
        Str = (Xtr @ Xtr.T) / train.size
        if not np.any(Str):
            raise FoldTooSmall(f"training fold {i} has an all-zero covariance")
        l, V = _descending_eigh(Str)
        proj = V.T @ X[:, fold]
        for gi, kap in enumerate(grid):
            _, m = cond_reg_solve(l, kap)
            quad = np.sum(proj * proj / m[:, None], axis=0)
            totals[gi] += float(np.sum(-0.5 * (n * log2pi + np.sum(np.log(m)) + quad)))
    scores = totals / N

    best = min(range(len(grid)), key=lambda i: (-scores[i], grid[i]))
    kappa = grid[best]
    l_full, V_full = _descending_eigh(sample_covariance(s))
    tau, m_full = cond_reg_solve(l_full, kappa)
    estimate = SpdMatrix.certified((V_full * m_full) @ V_full.T)
    return CondRegResult(
        estimate=estimate,
        kappa=kappa,
        tau=tau,
        cv_scores=tuple(zip(grid, (float(v) for v in scores))),
    )
