"""Exception hierarchy for nestcov.

Every failure mode raised by the library is a subclass of :class:`NestcovError`,
so callers (and the CLI) can map any failure to a single error category by
class name.
"""


class NestcovError(Exception):
    """Base class for all nestcov errors."""


# --- model construction -------------------------------------------------

class NonPositiveVariance(NestcovError):
    """A decay parameterization produced a non-positive variance."""


class GridTooSmall(NestcovError):
    """Grid dimensions too small for the requested neighbor level."""


class NotPositiveDefinite(NestcovError):
    """A matrix required to be positive definite is not."""


# --- estimation ----------------------------------------------------------

class SampleTooSmall(NestcovError):
    """Sample size below the estimator's minimum."""


class ZeroVariance(NestcovError):
    """A coordinate has zero sum of squares; the likelihood is unbounded."""


class NoBracket(NestcovError):
    """No sign change found for a scalar estimating equation."""


class NotConverged(NestcovError):
    """Iterative solver exhausted its iteration budget."""


class InfeasibleParams(NestcovError):
    """Parameter vector outside the model's feasible region."""


class InfeasibleInit(NestcovError):
    """Solver initialization outside the feasible region."""


class SingularHessian(NestcovError):
    """Newton step undefined because the Hessian is singular."""


class SingularInformation(NestcovError):
    """The reduced Fisher information matrix is singular."""


# --- regularizers --------------------------------------------------------

class DegenerateSample(NestcovError):
    """All observations are zero; no covariance scale can be estimated."""


class FoldTooSmall(NestcovError):
    """A cross-validation training fold carries no signal."""


# --- simulation / reporting ----------------------------------------------

class EmptyInput(NestcovError):
    """An aggregation was requested over an empty collection."""


class ShapeMismatch(NestcovError):
    """Array arguments have incompatible shapes."""


class EmptyTable(NestcovError):
    """A plot was requested for a table with no rows."""


# --- configuration -------------------------------------------------------

class ParseError(NestcovError):
    """Configuration document is syntactically or structurally invalid."""


class ValidationError(NestcovError):
    """Configuration parsed but violates an invariant."""
