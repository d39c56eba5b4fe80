"""Fisher information matrices and projected asymptotic covariances.

For a sub-model embedded in the diagonal family through a differentiable
map with Jacobian G, the asymptotic covariance of the implied diagonal
estimate is Q = G (G^T J G)^-1 G^T, where J is the ambient per-observation
information.  Nesting of parameterizations makes these Q matrices ordered
in the positive-semidefinite sense, which :func:`psd_order_check` verifies
numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, SingularInformation
from .models import DecayFamily, DecayModel, DiagonalCovariance, GmrfStructure, decay_diagonal

__all__ = [
    "FisherInfo",
    "ProjectedCov",
    "fisher_diag",
    "fisher_decay2",
    "fisher_decay3",
    "fisher_gmrf",
    "decay_jacobian",
    "decay3_asymptotic_cov",
    "projected_cov",
    "asymptotic_mse",
    "psd_order_check",
]

PSD_TOL = -1e-8


@dataclass(frozen=True)
class FisherInfo:
    """Per-observation Fisher information with parameter labels."""

    matrix: np.ndarray
    param_labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("information matrix must be square")
        if m.shape[0] != len(self.param_labels):
            raise ValueError("label count must match matrix dimension")
        scale = max(float(np.max(np.abs(m))), 1.0)
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise ValueError("information matrix must be symmetric")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProjectedCov:
    """Asymptotic covariance of an estimate expressed in the ambient space.

    Singular whenever the sub-model has fewer parameters than the ambient
    space; rank records the sub-model parameter count.
    """

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("projected covariance must be square")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def fisher_diag(d: DiagonalCovariance) -> FisherInfo:
    """Information of the free-diagonal model: diag(1/(2 d_i^2))."""
    return FisherInfo(
        matrix=np.diag(1.0 / (2.0 * d.d**2)),
        param_labels=tuple(f"d{i + 1}" for i in range(d.n)),
    )


def fisher_decay2(model: DecayModel) -> FisherInfo:
    """2x2 information of the (c, alpha) decay law.

    With f_i(alpha) = exp(alpha h_i) the logarithmic derivative f'/f equals
    h_i, so the matrix is [[n/(2c^2), sum(h)/(2c)], [sum(h)/(2c), sum(h^2)/2]].
    """
    if model.family is not DecayFamily.TWO_PARAM:
        raise ValueError("fisher_decay2 requires a two-parameter model")
    c = model.params[0]
    h = model.h
    m = np.array(
        [
            [model.n / (2.0 * c * c), np.sum(h) / (2.0 * c)],
            [np.sum(h) / (2.0 * c), np.sum(h * h) / 2.0],
        ]
    )
    return FisherInfo(matrix=m, param_labels=("c", "alpha"))


def fisher_decay3(model: DecayModel) -> FisherInfo:
    """3x3 information of the (c1, c2, alpha) decay law."""
    if model.family is not DecayFamily.THREE_PARAM:
        raise ValueError("fisher_decay3 requires a three-parameter model")
    c1, c2 = model.params[0], model.params[1]
    h = model.h
    g = c1 + c2 * h
    inv_g2 = 1.0 / (g * g)
    m = 0.5 * np.array(
        [
            [np.sum(inv_g2), np.sum(h * inv_g2), np.sum(h / g)],
            [np.sum(h * inv_g2), np.sum(h * h * inv_g2), np.sum(h * h / g)],
            [np.sum(h / g), np.sum(h * h / g), np.sum(h * h)],
        ]
    )
    return FisherInfo(matrix=m, param_labels=("c1", "c2", "alpha"))


def fisher_gmrf(theta, structure: GmrfStructure) -> FisherInfo:
    """Per-observation information of the banded precision model.

    Entry (j, l) = (1/2) Tr(P^-1 B_j P^-1 B_l); equals -H/N for the
    N-sample Hessian H.
    """
    theta = np.asarray(theta, dtype=float)
    B = structure.dense_bases()
    P = np.tensordot(theta, B, axes=1)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("P(theta) is not positive definite") from exc
    Pinv = np.linalg.inv(P)
    Pinv = 0.5 * (Pinv + Pinv.T)
    C = Pinv @ B
    M = np.einsum("jab,lba->jl", C, C)
    return FisherInfo(
        matrix=0.25 * (M + M.T),
        param_labels=tuple(f"theta{j + 1}" for j in range(structure.n_params)),
    )


def decay_jacobian(model: DecayModel, params=None) -> np.ndarray:
    """Jacobian d d_i / d param_j of the decay law, shape (n, k).

    Two-parameter columns: (-d_i/c, lam_i d_i).  Three-parameter columns:
    (-d_i/g_i, -d_i h_i/g_i, lam_i d_i) with g_i = c1 + c2 h_i.
    """
    m = model if params is None else model.with_params(params)
    d = decay_diagonal(m).d
    h = m.h
    if m.family is DecayFamily.TWO_PARAM:
        c = m.params[0]
        return np.column_stack([-d / c, -h * d])
    g = m.params[0] + m.params[1] * h
    return np.column_stack([-d / g, -d * h / g, -h * d])


def projected_cov(J: FisherInfo, G: np.ndarray) -> ProjectedCov:
    """Q = G (G^T J G)^-1 G^T, the sub-model asymptotic covariance.

    G is the n-by-k Jacobian of the embedding; raises SingularInformation
    when the reduced information G^T J G is not invertible.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != J.k:
        raise ValueError("Jacobian rows must match the ambient information dimension")
    reduced = G.T @ J.matrix @ G
    reduced = 0.5 * (reduced + reduced.T)
    k = G.shape[1]
    # Guard against numerically singular reduced information, which solve()
    # would silently accept.
    eigs = np.linalg.eigvalsh(reduced)
    if eigs.min() <= eigs.max() * 1e-13:
        raise SingularInformation("reduced information G^T J G is singular")
    Q = G @ np.linalg.solve(reduced, G.T)
    return ProjectedCov(matrix=0.5 * (Q + Q.T), rank=k)


def decay3_asymptotic_cov(J: FisherInfo, model: DecayModel) -> ProjectedCov:
    """Asymptotic second-moment matrix of the three-parameter decay MLE.

    Away from the c2 = 0 slice this is the ordinary projection
    G (G^T J G)^-1 G^T.  On the slice the parameterization is singular
    (the c2 and alpha tangent columns are parallel) and the plain formula
    does not exist.  There the tangent spans of nearby models converge to
    span{d, d*h, d*h^2}, but the curvature direction d*h^2 is reachable
    from one side only, so the estimate follows the noise in that
    direction in only half the realizations.  The asymptotic second
    moment is therefore the two-parameter projection plus HALF the extra
    rank-one contribution of the curvature direction:

        Q3 = Q2 + 0.5 * (Q_span{d, dh, dh^2} - Q2).

    Q3 satisfies Q2 <= Q3 <= J^-1 in the positive-semidefinite order.
    """
    if model.family is not DecayFamily.THREE_PARAM:
        raise ValueError("decay3_asymptotic_cov requires a three-parameter model")
    if model.params[1] != 0.0:
        return projected_cov(J, decay_jacobian(model))
    d = decay_diagonal(model).d
    h = model.h
    q2 = projected_cov(J, np.column_stack([d, d * h]))
    q_curved = projected_cov(J, np.column_stack([d, d * h, d * h * h]))
    return ProjectedCov(matrix=q2.matrix + 0.5 * (q_curved.matrix - q2.matrix), rank=3)


def asymptotic_mse(Q: ProjectedCov, N: int) -> float:
    """Expected squared Euclidean error of the estimate: Tr(Q)/N."""
    if N < 1:
        raise ValueError("sample size must be positive")
    return float(np.trace(Q.matrix)) / N


def psd_order_check(Q_small: ProjectedCov, Q_big: ProjectedCov) -> tuple[float, bool]:
    """Check Q_small <= Q_big in the positive-semidefinite order.

    Returns the minimum eigenvalue of (Q_big - Q_small) and whether it is
    above the tolerance -1e-8 that absorbs eigensolver noise.
    """
    if Q_small.n != Q_big.n:
        raise ValueError("projected covariances must have equal dimensions")
    diff = Q_big.matrix - Q_small.matrix
    min_eig = float(np.linalg.eigvalsh(0.5 * (diff + diff.T)).min())
    return min_eig, min_eig >= PSD_TOL
