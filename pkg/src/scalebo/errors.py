"""Exception types shared across the package."""


class ScaleboError(Exception):
    """Base class for all scalebo errors."""


class InsufficientData(ScaleboError):
    """Too few observations for the requested operation."""


class RankDeficient(ScaleboError):
    """Design matrix is rank deficient (e.g. all scale values identical)."""


class DegenerateVariance(ScaleboError):
    """Residual variance is zero; the noise posterior collapses."""


class DegenerateExponent(ScaleboError):
    """Power-law exponent is (numerically) zero; the objective is flat."""


class SurrogateOverflow(ScaleboError):
    """Objective evaluation is not representable in float64."""


class ExhaustedResampling(ScaleboError):
    """Too many consecutive degenerate posterior draws."""


class EvaluationFailure(ScaleboError):
    """A statistic evaluation raised; carries the iteration context."""

    def __init__(self, message, iteration=None, beta=None):
        super().__init__(message)
        self.iteration = iteration
        self.beta = beta


class UnknownKind(ScaleboError):
    """Unrecognized synthetic-problem kind."""


class NoEligibleGroups(ScaleboError):
    """No residual group meets the minimum per-group size."""


class DegenerateSample(ScaleboError):
    """Sample has zero variance; distribution fits are undefined."""


class BudgetExceeded(ScaleboError):
    """Probe budget exhausted before any stopping rule was met."""


class MismatchedProblem(ScaleboError):
    """Two run directories refer to different problems."""


class ConfigError(ScaleboError):
    """Malformed or inconsistent run configuration."""
