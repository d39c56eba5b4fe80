"""Maximum-likelihood estimators for the nested covariance hierarchy.

The hierarchy runs from the unconstrained sample covariance down through
the diagonal MLE to the two- and three-parameter spectral decay laws, and
separately through the banded-precision grid MRF models.  Every fit
returns a :class:`FitReport` whose residual norm measures how well the
estimating equations are satisfied at the returned parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleInit,
    InfeasibleParams,
    NoBracket,
    NotConverged,
    NotPositiveDefinite,
    SampleTooSmall,
    SingularHessian,
    ZeroVariance,
)
from .models import DecayFamily, DecayModel, DiagonalCovariance, GmrfStructure, SampleSet

__all__ = [
    "SufficientStats",
    "FitReport",
    "sample_covariance",
    "unbiased_sample_covariance",
    "sufficient_stats",
    "diagonal_mle",
    "loglik_diagonal",
    "fit_decay2",
    "decay_score3",
    "fit_decay3",
    "gmrf_loglik",
    "gmrf_score",
    "gmrf_hessian",
    "fit_gmrf",
    "DECAY2_TOL",
    "SCORE_TOL",
]

DECAY2_TOL = 1e-10
SCORE_TOL = 1e-8
_MAX_NEWTON_GMRF = 200
_MAX_HALVINGS = 50


@dataclass(frozen=True)
class SufficientStats:
    """Per-coordinate sums of squares together with the sample size."""

    s2: np.ndarray
    N: int

    def __post_init__(self):
        s2 = np.asarray(self.s2, dtype=float)
        if s2.ndim != 1 or s2.size < 1:
            raise ValueError("s2 must be a non-empty vector")
        if not np.all(np.isfinite(s2)) or np.any(s2 < 0):
            raise ValueError("sums of squares must be finite and non-negative")
        if self.N < 1:
            raise ValueError("sample size must be positive")
        s2 = s2.copy()
        s2.flags.writeable = False
        object.__setattr__(self, "s2", s2)

    @property
    def n(self) -> int:
        return self.s2.size


@dataclass(frozen=True)
class FitReport:
    """Outcome of an iterative fit.

    residual_norm is the max-norm of the estimating-equation residuals at
    the returned parameters; converged implies it is at or below the
    solver's tolerance.
    """

    params: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool

    def __post_init__(self):
        p = np.array(self.params, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "params", p)


def _row_sumsq(X: np.ndarray) -> np.ndarray:
    return (X * X).sum(axis=1)


def sample_covariance(s: SampleSet) -> np.ndarray:
    """Sample covariance (1/N) sum_i X_i X_i^T with known zero mean.

    The result is symmetric positive semidefinite with rank at most
    min(n, N); it is singular whenever N < n and therefore carries no
    positive-definiteness certificate.
    """
    X = s.data
    M = X @ X.T
    M = (M + M.T) * (0.5 / s.N)
    # Diagonal from row sums of squares so it is bitwise identical to the
    # diagonal MLE computed from the sufficient statistics.
    np.fill_diagonal(M, _row_sumsq(X) / s.N)
    return M


def unbiased_sample_covariance(s: SampleSet) -> np.ndarray:
    """Sample covariance normalized by N-1 instead of N."""
    if s.N < 2:
        raise SampleTooSmall("unbiased covariance needs at least 2 samples")
    return sample_covariance(s) * (s.N / (s.N - 1))


def sufficient_stats(s: SampleSet) -> SufficientStats:
    """Per-coordinate sums of squares S_j^2 = sum_k X[j,k]^2."""
    return SufficientStats(s2=_row_sumsq(s.data), N=s.N)


def diagonal_mle(stats: SufficientStats) -> DiagonalCovariance:
    """MLE over all positive diagonal covariances: d_j = S_j^2 / N.

    Coincides with the diagonal of the sample covariance.
    """
    if np.any(stats.s2 == 0):
        raise ZeroVariance("a coordinate has zero sum of squares; likelihood unbounded")
    return DiagonalCovariance(d=stats.s2 / stats.N)


def loglik_diagonal(d: DiagonalCovariance, stats: SufficientStats) -> float:
    """Gaussian log-likelihood of a diagonal covariance given the statistics.

    l = -(N/2) n log(2 pi) + (N/2) sum_i log tau_i - (1/2) sum_i tau_i S_i^2
    with tau_i = 1/d_i.
    """
    if d.n != stats.n:
        raise ValueError("dimension mismatch between covariance and statistics")
    n, N = d.n, stats.N
    return (
        -0.5 * N * n * math.log(2.0 * math.pi)
        + 0.5 * N * float(np.sum(np.log(d.tau)))
        - 0.5 * float(np.dot(d.tau, stats.s2))
    )


# --------------------------------------------------------------------------
# two-parameter decay fit
# --------------------------------------------------------------------------


def fit_decay2(stats: SufficientStats, model: DecayModel) -> FitReport:
    """Fit the two-parameter decay law d_i = 1/(c f_i(alpha)).

    alpha solves the scalar equation

        sum_i S_i^2 f_i(alpha) (h_i - mean(h)) = 0,

    found by an expanding bracket search from alpha = 0 (factor-2 growth up
    to |alpha| = 1024) followed by bisection to machine resolution; c then
    follows from 1/c = (1/n) sum_i (S_i^2/N) f_i(alpha).

    The reported residual of the alpha equation is normalized by n*N so its
    tolerance is stable across problem sizes; the normalization does not
    move the root.
    """
    if model.family is not DecayFamily.TWO_PARAM:
        raise ValueError("fit_decay2 requires a two-parameter model")
    if stats.n != model.n:
        raise ValueError("statistics dimension does not match model spectrum")
    if not np.any(stats.s2 > 0):
        raise ZeroVariance("all coordinates have zero sum of squares")
    h = model.h
    w = stats.s2 / stats.N
    dev = h - h.mean()

    def scaled_resid(alpha: float) -> float:
        # Positive rescaling by exp(-max(alpha*h)) keeps the sign and the
        # root while avoiding overflow during the bracket search.
        t = alpha * h
        return float(np.dot(w * np.exp(t - t.max()), dev))

    evals = 1
    g0 = scaled_resid(0.0)
    if g0 == 0.0:
        alpha = 0.0
    else:
        direction = 1.0 if g0 < 0 else -1.0
        a, ga = 0.0, g0
        b = None
        step = 2.0**-20
        while step <= 1024.0:
            cand = direction * step
            gc = scaled_resid(cand)
            evals += 1
            if (gc == 0.0) or (gc > 0) != (ga > 0):
                b = cand
                break
            a, ga = cand, gc
            step *= 2.0
        if b is None:
            raise NoBracket("no sign change of the decay-rate equation on |alpha| <= 1024")
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid == a or mid == b:
                break
            gm = scaled_resid(mid)
            evals += 1
            if gm == 0.0:
                a = b = mid
                break
            if (gm > 0) == (ga > 0):
                a, ga = mid, gm
            else:
                b = mid
        alpha = 0.5 * (a + b)

    t = alpha * h
    tmax = float(t.max())
    mean_scaled = float(np.mean(w * np.exp(t - tmax)))
    c = math.exp(-(tmax + math.log(mean_scaled)))

    with np.errstate(over="ignore"):
        f = np.exp(t)
    r_alpha = float(np.dot(w * f, dev)) / stats.n
    r_c = 1.0 / c - float(np.mean(w * f))
    residual = max(abs(r_alpha), abs(r_c))
    if not math.isfinite(residual) or residual > DECAY2_TOL:
        raise NotConverged(f"decay2 residual {residual:.3e} above tolerance {DECAY2_TOL:.0e}")
    return FitReport(
        params=np.array([c, alpha]), iterations=evals, residual_norm=residual, converged=True
    )


# --------------------------------------------------------------------------
# three-parameter decay fit
# --------------------------------------------------------------------------


def decay_score3(params, stats: SufficientStats, model: DecayModel) -> np.ndarray:
    """Estimating-equation residuals of the three-parameter decay law.

    Returns the left-hand sides of the three stationarity equations in the
    order (c1, c2, alpha); each equals (2/N) times the corresponding
    partial derivative of the log-likelihood.
    """
    if model.family is not DecayFamily.THREE_PARAM:
        raise ValueError("decay_score3 requires a three-parameter model")
    c1, c2, alpha = (float(p) for p in np.asarray(params, dtype=float))
    h = model.h
    g = c1 + c2 * h
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise InfeasibleParams("c1 + c2*h_i must be strictly positive for all i")
    with np.errstate(over="ignore"):
        f = np.exp(alpha * h)
    if not np.all(np.isfinite(f)):
        raise InfeasibleParams("decay factor overflows at these parameters")
    w = stats.s2 / stats.N
    wf = w * f
    return np.array(
        [
            float(np.sum(1.0 / g - wf)),
            float(np.sum(h / g - h * wf)),
            float(np.sum(h - g * h * wf)),
        ]
    )


def _inner_decay3(h: np.ndarray, b: np.ndarray, x0) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximize sum(log u) - sum(u b) over u = c1 + c2*h > 0.

    Strictly concave in (c1, c2); damped Newton with analytic Hessian and
    step halving against the feasibility boundary.  Returns (x, u, value).
    """
    A = np.column_stack([np.ones_like(h), h])
    x = np.asarray(x0, dtype=float).copy()
    u = A @ x
    if not np.all(u > 0):
        x = np.array([1.0 / float(np.mean(b)), 0.0])
        u = A @ x
    val = float(np.sum(np.log(u)) - np.dot(u, b))
    for _ in range(80):
        g = A.T @ (1.0 / u - b)
        gscale = float(np.max(A.T @ (1.0 / u + b)))
        if float(np.max(np.abs(g))) <= 1e-13 * gscale:
            break
        H = (A.T * (1.0 / (u * u))) @ A
        step = np.linalg.solve(H, g)
        t, accepted = 1.0, False
        for _ in range(_MAX_HALVINGS + 1):
            un = A @ (x + t * step)
            if np.all(un > 0):
                valn = float(np.sum(np.log(un)) - np.dot(un, b))
                if valn >= val - 1e-12 * abs(val):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        x, u, val = x + t * step, un, valn
    return x, u, val


def fit_decay3(stats: SufficientStats, model: DecayModel, init=None) -> FitReport:
    """Fit the three-parameter decay law by profiling out (c1, c2).

    For fixed alpha the log-likelihood is strictly concave in (c1, c2)
    and solved by damped Newton; the profile over alpha is maximized by a
    coarse grid around the two-parameter fit followed by a bracketed
    secant root-solve of the alpha estimating equation along the profile.

    Plain Newton on the full three-equation system cannot be used: the
    embedded two-parameter fit (c, 0, alpha) is a stationary point of the
    system for every data set (the c2 and alpha tangent directions are
    parallel on the c2 = 0 slice), so the score-based iteration would
    stop there even when the likelihood is higher elsewhere.  Profiling
    finds the actual maximizer; when the maximizer lies on the c2 = 0
    slice (which happens with positive probability under a two-parameter
    truth) it is returned with c2 = 0.

    Converged when the raw score max-norm is at or below 1e-8.
    """
    if model.family is not DecayFamily.THREE_PARAM:
        raise ValueError("fit_decay3 requires a three-parameter model")
    if stats.n != model.n:
        raise ValueError("statistics dimension does not match model spectrum")
    if not np.any(stats.s2 > 0):
        raise ZeroVariance("all coordinates have zero sum of squares")
    h = model.h
    w = stats.s2 / stats.N
    sum_h = float(np.sum(h))

    evals = 0

    def solve_at(alpha: float, x0):
        """Inner maximizer at fixed alpha: (x, u, b, profile log-likelihood)."""
        nonlocal evals
        evals += 1
        with np.errstate(over="ignore"):
            b = np.exp(alpha * h) * w
        if not np.all(np.isfinite(b)):
            raise OverflowError
        x, u, val = _inner_decay3(h, b, x0)
        return x, u, b, val + alpha * sum_h

    if init is not None:
        x_init = np.asarray(init, dtype=float)
        if x_init.shape != (3,):
            raise ValueError("init must be a 3-vector (c1, c2, alpha)")
        if np.any(x_init[0] + x_init[1] * h <= 0):
            raise InfeasibleInit("initialization violates c1 + c2*h_i > 0")
        alpha0, x0 = float(x_init[2]), x_init[:2].copy()
    else:
        two = fit_decay2(stats, DecayModel.two_param(model.lam, 1.0, 0.0))
        alpha0, x0 = float(two.params[1]), np.array([two.params[0], 0.0])

    def eval_at(alpha: float, x_start):
        """(alpha, x, profile loglik, alpha-equation residual along profile)."""
        x, u, b, ll = solve_at(alpha, x_start)
        return alpha, x, ll, sum_h - float(np.dot(u * b, h))

    # Candidate alphas: a coarse grid plus a multiscale ladder anchored at
    # the embedded two-parameter fit.  The profile generically has a local
    # maximum on each side of that point (reached with opposite signs of
    # c2) in addition to the stationary point at the point itself, and the
    # side maxima can sit anywhere from ~1e-6*span to ~span away.
    span = 10.0 / float(h.max() - h.min())
    lad = span * np.power(10.0, np.arange(-6.0, 0.01, 0.5))
    ladder = np.concatenate([alpha0 - lad[::-1], [alpha0], alpha0 + lad])

    coarse_center, coarse_span = alpha0, span
    points = None
    for _ in range(4):  # widen the coarse grid if the maximum lands on its edge
        cands = np.unique(
            np.concatenate([coarse_center + np.linspace(-coarse_span, coarse_span, 41), ladder])
        )
        points = []
        xcur = x0
        for a in cands:
            try:
                pt = eval_at(float(a), xcur)
            except (OverflowError, np.linalg.LinAlgError):
                continue
            xcur = pt[1]
            points.append(pt)
        if not points:
            raise NotConverged("profile likelihood evaluation failed across the alpha grid")
        k = int(np.argmax([p[2] for p in points]))
        if 0 < k < len(points) - 1:
            break
        coarse_center, coarse_span = points[k][0], coarse_span * 4.0
    else:
        raise NotConverged("profile maximum kept escaping the alpha search range")

    def root_between(p_pos, p_neg):
        """Polish a decreasing zero crossing of the profile alpha equation.

        Alternates secant and bisection steps; returns the evaluated point
        with the smallest |residual|.
        """
        (a_lo, x_lo, _, f_lo), (a_hi, _, _, f_hi) = p_pos, p_neg
        best_pt, best_f = p_pos if abs(f_lo) < abs(f_hi) else p_neg, min(abs(f_lo), abs(f_hi))
        xcur = x_lo
        for it in range(60):
            if best_f == 0.0 or (a_hi - a_lo) <= 1e-16 * max(abs(a_lo), abs(a_hi)) + 1e-300:
                break
            if it % 2 == 0 and f_hi != f_lo:
                m = a_hi - f_hi * (a_hi - a_lo) / (f_hi - f_lo)
                if not (a_lo < m < a_hi):
                    m = 0.5 * (a_lo + a_hi)
            else:
                m = 0.5 * (a_lo + a_hi)
            if m == a_lo or m == a_hi:
                break
            try:
                pt = eval_at(m, xcur)
            except (OverflowError, np.linalg.LinAlgError):
                break
            xcur = pt[1]
            if abs(pt[3]) < best_f:
                best_pt, best_f = pt, abs(pt[3])
            if pt[3] > 0:
                a_lo, f_lo = m, pt[3]
            else:
                a_hi, f_hi = m, pt[3]
        return best_pt

    # Every decreasing sign change hosts a local maximum of the profile;
    # polish each and keep the stationary point with the best likelihood.
    # The anchor point itself is always stationary and covers the case
    # where the maximizer has c2 = 0 exactly.
    stationary = [eval_at(alpha0, x0), max(points, key=lambda p: p[2])]
    for p1, p2 in zip(points, points[1:]):
        if p1[3] > 0.0 and p2[3] <= 0.0:
            stationary.append(root_between(p1, p2))
    a_best, x_best, _, _ = max(stationary, key=lambda p: p[2])

    params = np.array([x_best[0], x_best[1], a_best])
    residual = float(np.max(np.abs(decay_score3(params, stats, model))))
    if not math.isfinite(residual) or residual > SCORE_TOL:
        raise NotConverged(f"decay3 residual {residual:.3e} above tolerance {SCORE_TOL:.0e}")
    return FitReport(params=params, iterations=evals, residual_norm=residual, converged=True)


# --------------------------------------------------------------------------
# grid MRF (banded precision) estimation
# --------------------------------------------------------------------------


def _assemble(B: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.tensordot(theta, B, axes=1)


def _chol_or_none(P: np.ndarray):
    if not np.all(np.isfinite(P)):
        return None
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return None


def _check_theta(structure: GmrfStructure, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (structure.n_params,):
        raise ValueError(f"theta must have length {structure.n_params}")
    return theta


def gmrf_loglik(theta, sigma_hat: np.ndarray, structure: GmrfStructure, N: int) -> float:
    """Gaussian log-likelihood of the banded precision P(theta).

    l = (N/2) log det P - (N/2) Tr(P Sigma_hat) - (nN/2) log(2 pi),
    where Sigma_hat is the sample covariance of the N observations.
    """
    theta = _check_theta(structure, theta)
    B = structure.dense_bases()
    P = _assemble(B, theta)
    L = _chol_or_none(P)
    if L is None:
        raise NotPositiveDefinite("P(theta) is not positive definite")
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    tr = float(np.einsum("ab,ba->", P, np.asarray(sigma_hat, dtype=float)))
    n = structure.n
    return 0.5 * N * logdet - 0.5 * N * tr - 0.5 * n * N * math.log(2.0 * math.pi)


def gmrf_score(theta, sigma_hat: np.ndarray, structure: GmrfStructure, N: int) -> np.ndarray:
    """Gradient of gmrf_loglik in theta: (N/2) [Tr(P^-1 B_j) - Tr(Sigma_hat B_j)]."""
    theta = _check_theta(structure, theta)
    B = structure.dense_bases()
    P = _assemble(B, theta)
    if _chol_or_none(P) is None:
        raise NotPositiveDefinite("P(theta) is not positive definite")
    Pinv = np.linalg.inv(P)
    Pinv = 0.5 * (Pinv + Pinv.T)
    S = np.asarray(sigma_hat, dtype=float)
    return 0.5 * N * (np.einsum("jab,ba->j", B, Pinv) - np.einsum("jab,ba->j", B, S))


def gmrf_hessian(theta, structure: GmrfStructure, N: int) -> np.ndarray:
    """Hessian of gmrf_loglik: entry (j,l) = -(N/2) Tr(P^-1 B_j P^-1 B_l)."""
    theta = _check_theta(structure, theta)
    B = structure.dense_bases()
    P = _assemble(B, theta)
    if _chol_or_none(P) is None:
        raise NotPositiveDefinite("P(theta) is not positive definite")
    Pinv = np.linalg.inv(P)
    Pinv = 0.5 * (Pinv + Pinv.T)
    C = Pinv @ B
    M = np.einsum("jab,lba->jl", C, C)
    return -0.25 * N * (M + M.T)


def fit_gmrf(sigma_hat: np.ndarray, structure: GmrfStructure, init=None) -> FitReport:
    """Newton MLE of the banded precision parameters.

    Iterates theta <- theta - H^-1 score with step halving until P(theta)
    stays positive definite; converged when the sample-size-normalized
    score max_j |Tr(P^-1 B_j) - Tr(Sigma_hat B_j)| is at or below 1e-8.
    Default initialization is theta = (1/mean(diag Sigma_hat), 0, ..., 0).
    """
    S = np.asarray(sigma_hat, dtype=float)
    n, p = structure.n, structure.n_params
    if S.shape != (n, n):
        raise ValueError(f"sigma_hat must be {n}x{n}")
    B = structure.dense_bases()
    tr_SB = np.einsum("jab,ba->j", B, S)

    if init is None:
        mean_diag = float(np.trace(S)) / n
        if not mean_diag > 0:
            raise NotPositiveDefinite("sample covariance has non-positive mean diagonal")
        theta = np.zeros(p)
        theta[0] = 1.0 / mean_diag
    else:
        theta = _check_theta(structure, init).copy()
        if _chol_or_none(_assemble(B, theta)) is None:
            raise NotPositiveDefinite("initialization P(theta) is not positive definite")

    for it in range(_MAX_NEWTON_GMRF):
        P = _assemble(B, theta)
        Pinv = np.linalg.inv(P)
        Pinv = 0.5 * (Pinv + Pinv.T)
        g = np.einsum("jab,ba->j", B, Pinv) - tr_SB
        norm = float(np.max(np.abs(g)))
        if norm <= SCORE_TOL:
            return FitReport(params=theta, iterations=it, residual_norm=norm, converged=True)
        C = Pinv @ B
        M = np.einsum("jab,lba->jl", C, C)
        M = 0.5 * (M + M.T)
        try:
            step = np.linalg.solve(M, g)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("Newton step undefined: singular curvature matrix") from exc
        t = 1.0
        accepted = False
        for _ in range(60):
            cand = theta + t * step
            if _chol_or_none(_assemble(B, cand)) is not None:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise NotConverged("step halving could not keep P(theta) positive definite")
        theta = cand
    raise NotConverged(f"Newton did not reach tolerance in {_MAX_NEWTON_GMRF} iterations")
