"""Covariance model structures.

Two families of models live here:

* spectral diagonal models, where the covariance is diagonal in a fixed
  transform basis and the variances follow an exponential decay law driven
  by the eigenvalues of the discrete Laplacian on a rectangular grid, and
* grid Markov random fields, where the *inverse* covariance (precision)
  is a linear combination of symmetric 0/1 neighbor-class basis matrices.

All types are immutable after construction and all operations are pure,
so values can be shared freely across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridTooSmall, NonPositiveVariance, NotPositiveDefinite

__all__ = [
    "SampleSet",
    "SpdMatrix",
    "DiagonalCovariance",
    "DecayFamily",
    "DecayModel",
    "NeighborLevel",
    "GmrfStructure",
    "laplace_eigenvalues",
    "decay_diagonal",
    "gmrf_structure",
    "precision_assemble",
]

_SYM_RTOL = 1e-12
_CERT_RTOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SampleSet:
    """A collection of zero-mean observation vectors, one per column.

    Attributes
    ----------
    data : ndarray, shape (n, N)
        Observation matrix; column i is the i-th sample vector.
    seed : int or None
        Seed of the stream that generated the sample, if any.
    """

    data: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"sample matrix must be 2-D and non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("sample matrix contains non-finite entries")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def n(self) -> int:
        """State dimension (number of rows)."""
        return self.data.shape[0]

    @property
    def N(self) -> int:
        """Sample size (number of columns)."""
        return self.data.shape[1]


@dataclass(frozen=True)
class SpdMatrix:
    """Dense symmetric matrix with an optional positive-definiteness certificate.

    The certificate, when present, is a lower-triangular Cholesky factor L
    with strictly positive diagonal satisfying L @ L.T == values up to
    relative tolerance 1e-10.
    """

    values: np.ndarray
    pd_certificate: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {v.shape}")
        scale = max(float(np.max(np.abs(v))), 1.0)
        if np.max(np.abs(v - v.T)) > _SYM_RTOL * scale:
            raise ValueError("matrix is not symmetric to relative tolerance 1e-12")
        object.__setattr__(self, "values", _readonly(v))
        if self.pd_certificate is not None:
            L = np.asarray(self.pd_certificate, dtype=float)
            if L.shape != v.shape:
                raise ValueError("certificate shape does not match values")
            if not np.all(np.diag(L) > 0):
                raise ValueError("certificate diagonal must be strictly positive")
            if np.max(np.abs(L @ L.T - v)) > _CERT_RTOL * scale:
                raise ValueError("certificate does not reproduce values to tolerance 1e-10")
            object.__setattr__(self, "pd_certificate", _readonly(L))

    @classmethod
    def certified(cls, values: np.ndarray) -> "SpdMatrix":
        """Build an SpdMatrix with a Cholesky certificate.

        Raises
        ------
        NotPositiveDefinite
            If the Cholesky factorization fails.
        """
        v = np.asarray(values, dtype=float)
        v = 0.5 * (v + v.T)
        try:
            L = np.linalg.cholesky(v)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("Cholesky factorization failed") from exc
        return cls(values=v, pd_certificate=L)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DiagonalCovariance:
    """Diagonal covariance with variances d and precisions tau = 1/d."""

    d: np.ndarray
    tau: np.ndarray = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("d must be a non-empty vector")
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            raise NonPositiveVariance("all variances must be finite and strictly positive")
        object.__setattr__(self, "d", _readonly(d))
        object.__setattr__(self, "tau", _readonly(1.0 / d))

    @property
    def n(self) -> int:
        return self.d.size

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.d)

    def as_spd(self) -> SpdMatrix:
        """Dense diagonal matrix with a sqrt-diagonal Cholesky certificate."""
        return SpdMatrix(values=np.diag(self.d), pd_certificate=np.diag(np.sqrt(self.d)))


class DecayFamily(enum.Enum):
    """Parameter family of the spectral decay law."""

    TWO_PARAM = "two_param"      # d_i = (c * f_i(alpha))^-1
    THREE_PARAM = "three_param"  # d_i = ((c1 + c2*h_i) * f_i(alpha))^-1

    @property
    def k(self) -> int:
        return 2 if self is DecayFamily.TWO_PARAM else 3


@dataclass(frozen=True)
class DecayModel:
    """Spectral-diagonal decay model on a fixed Laplacian spectrum.

    The spectrum lam must be strictly negative; the positive weights are
    h_i = -lam_i and the decay factor is f_i(alpha) = exp(-alpha * lam_i)
    = exp(alpha * h_i).

    Parameters are (c, alpha) for the two-parameter family and
    (c1, c2, alpha) for the three-parameter family; the variances are

        two-parameter:    d_i = 1 / (c * f_i(alpha))
        three-parameter:  d_i = 1 / ((c1 + c2 * h_i) * f_i(alpha))

    Feasibility requires c > 0, respectively c1 + c2*h_i > 0 for every i.
    """

    lam: np.ndarray
    family: DecayFamily
    params: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("lam must be a non-empty vector")
        if not np.all(np.isfinite(lam)) or not np.all(lam < 0):
            raise ValueError("Laplacian eigenvalues must be finite and strictly negative")
        if lam.size >= 2 and np.all(lam == lam[0]):
            raise ValueError("all eigenvalues equal: decay rate is unidentifiable")
        params = np.asarray(self.params, dtype=float)
        if params.shape != (self.family.k,):
            raise ValueError(
                f"{self.family.value} family needs {self.family.k} parameters, got shape {params.shape}"
            )
        if not np.all(np.isfinite(params)):
            raise ValueError("parameters must be finite")
        h = -lam
        if self.family is DecayFamily.TWO_PARAM:
            if params[0] <= 0:
                raise NonPositiveVariance("c must be strictly positive")
        else:
            if np.any(params[0] + params[1] * h <= 0):
                raise NonPositiveVariance("c1 + c2*h_i must be strictly positive for all i")
        object.__setattr__(self, "lam", _readonly(lam))
        object.__setattr__(self, "params", _readonly(params))

    @classmethod
    def two_param(cls, lam, c: float, alpha: float) -> "DecayModel":
        return cls(lam=lam, family=DecayFamily.TWO_PARAM, params=np.array([c, alpha]))

    @classmethod
    def three_param(cls, lam, c1: float, c2: float, alpha: float) -> "DecayModel":
        return cls(lam=lam, family=DecayFamily.THREE_PARAM, params=np.array([c1, c2, alpha]))

    def with_params(self, params) -> "DecayModel":
        return replace(self, params=np.asarray(params, dtype=float))

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def h(self) -> np.ndarray:
        """Positive spectral weights h_i = -lam_i."""
        return -self.lam

    def decay_factor(self, alpha: float) -> np.ndarray:
        """f_i(alpha) = exp(-alpha * lam_i)."""
        return np.exp(-alpha * self.lam)


class NeighborLevel(enum.Enum):
    """Neighborhood size of the grid Markov random field."""

    N4 = 4
    N8 = 8
    N12 = 12

    @property
    def n_bases(self) -> int:
        return {4: 3, 8: 5, 12: 7}[self.value]


@dataclass(frozen=True)
class GmrfStructure:
    """Banded precision parameterization for a field on an m-by-k grid.

    Gridpoint (r, c) maps to stacked index c*m + r (columns stacked
    vertically).  Each basis is a set of directed index pairs representing
    a symmetric 0/1 matrix; bases[0] is the identity and the remaining
    bases are off-diagonal neighbor classes.  The precision matrix is
    P(theta) = sum_j theta_j * B_j.
    """

    rows: int
    cols: int
    level: NeighborLevel
    bases: tuple[frozenset[tuple[int, int]], ...]

    def __post_init__(self):
        n = self.rows * self.cols
        if len(self.bases) != self.level.n_bases:
            raise ValueError(f"{self.level.name} needs {self.level.n_bases} bases")
        identity = frozenset((i, i) for i in range(n))
        if self.bases[0] != identity:
            raise ValueError("bases[0] must be the identity index set")
        seen: set[tuple[int, int]] = set()
        for b in self.bases:
            if seen & b:
                raise ValueError("bases must be pairwise disjoint")
            seen |= b
        for b in self.bases[1:]:
            for a, c in b:
                if a == c or (c, a) not in b:
                    raise ValueError("off-diagonal bases must be symmetric and zero-diagonal")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def n_params(self) -> int:
        return len(self.bases)

    def dense_bases(self) -> np.ndarray:
        """Stack of dense basis matrices, shape (n_params, n, n).

        The stack is rebuilt on each call; callers on hot paths should
        keep their own reference.
        """
        n = self.n
        out = np.zeros((self.n_params, n, n))
        for j, pairs in enumerate(self.bases):
            for a, b in pairs:
                out[j, a, b] = 1.0
        return out


def laplace_eigenvalues(m: int, k: int) -> np.ndarray:
    """Eigenvalues of the Dirichlet 5-point Laplacian on an m-by-k grid.

    The grid discretizes the unit square with mesh widths 1/(m+1) and
    1/(k+1); the eigenvalues are

        lam_{j,l} = -4 (m+1)^2 sin^2(j pi / (2(m+1)))
                    - 4 (k+1)^2 sin^2(l pi / (2(k+1)))

    for j = 1..m, l = 1..k, all strictly negative.  The result is sorted
    descending (closest to zero first).
    """
    if m < 1 or k < 1:
        raise ValueError("grid dimensions must be at least 1")
    j = np.arange(1, m + 1)
    l = np.arange(1, k + 1)
    row = -4.0 * (m + 1) ** 2 * np.sin(j * np.pi / (2 * (m + 1))) ** 2
    col = -4.0 * (k + 1) ** 2 * np.sin(l * np.pi / (2 * (k + 1))) ** 2
    lam = (row[:, None] + col[None, :]).flatten(order="F")
    return np.sort(lam)[::-1].copy()


def decay_diagonal(model: DecayModel) -> DiagonalCovariance:
    """Evaluate the decay law of a model into an explicit diagonal covariance."""
    f = model.decay_factor(model.params[-1])
    if model.family is DecayFamily.TWO_PARAM:
        tau = model.params[0] * f
    else:
        tau = (model.params[0] + model.params[1] * model.h) * f
    if not np.all(np.isfinite(tau)) or np.any(tau <= 0):
        raise NonPositiveVariance("decay law produced non-positive precision")
    return DiagonalCovariance(d=1.0 / tau)


def _grid_pairs(m: int, k: int, dr: int, dc: int) -> frozenset[tuple[int, int]]:
    """Directed index pairs linking (r, c) to (r+dr, c+dc) inside the grid."""
    pairs = set()
    for c in range(k):
        for r in range(m):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < m and 0 <= c2 < k:
                a, b = c * m + r, c2 * m + r2
                pairs.add((a, b))
                pairs.add((b, a))
    return frozenset(pairs)


def gmrf_structure(m: int, k: int, level: NeighborLevel) -> GmrfStructure:
    """Build the neighbor-class basis sets for a grid of given size and level.

    Basis order: identity; vertical +-1; horizontal +-1 column; for N8 the
    two diagonal directions as separate classes; for N12 the distance-2
    vertical and distance-2 horizontal classes.  Pairs crossing a grid
    edge are excluded, so vertical adjacency never wraps between columns.
    """
    if m < 3 or k < 3:
        raise GridTooSmall(f"need at least a 3x3 grid, got {m}x{k}")
    n = m * k
    bases: list[frozenset[tuple[int, int]]] = [frozenset((i, i) for i in range(n))]
    bases.append(_grid_pairs(m, k, 1, 0))   # vertical neighbors
    bases.append(_grid_pairs(m, k, 0, 1))   # horizontal neighbors
    if level in (NeighborLevel.N8, NeighborLevel.N12):
        bases.append(_grid_pairs(m, k, -1, 1))  # NE/SW diagonal
        bases.append(_grid_pairs(m, k, 1, 1))   # NW/SE diagonal
    if level is NeighborLevel.N12:
        bases.append(_grid_pairs(m, k, 2, 0))   # distance-2 vertical
        bases.append(_grid_pairs(m, k, 0, 2))   # distance-2 horizontal
    return GmrfStructure(rows=m, cols=k, level=level, bases=tuple(bases))


def precision_assemble(structure: GmrfStructure, theta) -> SpdMatrix:
    """Assemble P = sum_j theta_j B_j with a positive-definiteness certificate.

    Raises
    ------
    NotPositiveDefinite
        If theta lies outside the feasible cone (factorization fails).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (structure.n_params,):
        raise ValueError(
            f"theta must have length {structure.n_params}, got shape {theta.shape}"
        )
    n = structure.n
    P = np.zeros((n, n))
    for t, pairs in zip(theta, structure.bases):
        if t == 0.0:
            continue
        idx = np.array(sorted(pairs))
        P[idx[:, 0], idx[:, 1]] += t
    return SpdMatrix.certified(P)
