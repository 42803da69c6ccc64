"""Analytic surrogate objective and closed-form Thompson sampling.

For fixed parameters (a, b, eps2) the conditional model
``s | beta = b * beta^a * zeta`` with ``zeta ~ logN(0, eps2)`` induces an
objective with an exact expectation:

    f(beta) = E[|s - s0|^2 | beta]
            = c1 * beta^(2a) + (c2 * beta^a - s0)^2,

    c1 = b^2 * (exp(2*eps2) - exp(eps2)),   c2 = b * exp(eps2 / 2).

f has a single interior critical point on (0, inf), which is its global
minimum for either sign of a:

    beta* = (s0 / (b * exp(1.5 * eps2)))^(1/a).

Thompson sampling therefore needs no numerical optimizer: each posterior
draw of (a, ln_b, eps2) maps straight to its optimizer through the formula
above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import glm
from .errors import DegenerateExponent, ExhaustedResampling, SurrogateOverflow

# exp() overflows float64 just above this exponent.
_LOG_MAX = math.log(np.finfo(float).max)

# |a| below this is treated as a flat objective (no interior optimum).
EXPONENT_TOL = 1e-12

# Per-proposal cap on redraws after degenerate or non-evaluable samples.
MAX_RESAMPLE_ATTEMPTS = 100


@dataclass(frozen=True)
class SurrogateObjective:
    """The induced objective f(beta) for one fixed parameter triple.

    ``eps2 = 0`` is allowed (deterministic surrogate, c1 = 0) even though
    posterior draws never produce it.
    """

    a: float
    b: float
    eps2: float
    s0: float
    c1: float = field(init=False)
    c2: float = field(init=False)

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError("exponent a must be finite")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError("scale b must be finite and > 0")
        if not (self.eps2 >= 0 and math.isfinite(self.eps2)):
            raise ValueError("noise variance eps2 must be finite and >= 0")
        if not (self.s0 > 0 and math.isfinite(self.s0)):
            raise ValueError("target statistic s0 must be finite and > 0")
        # exp(eps2)*expm1(eps2) keeps c1 exactly 0 at eps2 = 0 and >= 0 always.
        object.__setattr__(self, "c1", self.b * self.b * math.exp(self.eps2) * math.expm1(self.eps2))
        object.__setattr__(self, "c2", self.b * math.exp(0.5 * self.eps2))

    @classmethod
    def from_sample(cls, sample: glm.GlmPosteriorSample, s0: float) -> "SurrogateObjective":
        return cls(a=sample.a, b=math.exp(sample.ln_b), eps2=sample.eps2, s0=s0)


@dataclass(frozen=True)
class ThompsonProposal:
    beta_star: float
    f_star: float
    source_sample: glm.GlmPosteriorSample


@dataclass(frozen=True)
class ThompsonBatch:
    """One synchronous batch of Thompson proposals."""

    proposals: list[ThompsonProposal]
    clamped_count: int

    @property
    def betas(self) -> list[float]:
        return [p.beta_star for p in self.proposals]


def evaluate(obj: SurrogateObjective, beta: float) -> float:
    """Evaluate f(beta) analytically.

    Works in log space first (a * ln beta is formed once) so that the
    overflow case |a * ln beta| beyond float range surfaces as an explicit
    :class:`SurrogateOverflow` instead of a silent infinity.
    """
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError("beta must be finite and > 0")
    t = obj.a * math.log(beta)
    try:
        mean_term = math.exp(math.log(obj.c2) + t)
        var_term = math.exp(math.log(obj.c1) + 2.0 * t) if obj.c1 > 0 else 0.0
        value = var_term + (mean_term - obj.s0) ** 2
    except OverflowError:
        raise SurrogateOverflow(f"f({beta:g}) overflows float64 (a*ln beta = {t:g})") from None
    if not math.isfinite(value):
        raise SurrogateOverflow(f"f({beta:g}) is not finite (a*ln beta = {t:g})")
    return value


def evaluate_on_grid(obj: SurrogateObjective, betas) -> np.ndarray:
    """Vectorized :func:`evaluate` over an array of beta values."""
    arr = np.asarray(betas, dtype=float)
    if arr.size and (np.any(arr <= 0) or not np.all(np.isfinite(arr))):
        raise ValueError("beta values must be finite and > 0")
    t = obj.a * np.log(arr)
    with np.errstate(over="ignore"):
        mean_term = np.exp(np.log(obj.c2) + t)
        var_term = np.exp(np.log(obj.c1) + 2.0 * t) if obj.c1 > 0 else np.zeros_like(t)
        values = var_term + (mean_term - obj.s0) ** 2
    if not np.all(np.isfinite(values)):
        raise SurrogateOverflow("objective overflows float64 on the given grid")
    return values


def log_argmin(a: float, ln_b: float, eps2: float, s0: float) -> float:
    """ln of the unconstrained minimizer for the given parameter triple.

    Kept in log space so callers can clamp to a feasible interval before
    exponentiating; raises :class:`DegenerateExponent` when the objective
    has no interior optimum (a numerically zero).
    """
    if abs(a) < EXPONENT_TOL:
        raise DegenerateExponent(f"exponent a = {a:g} is numerically zero")
    return (math.log(s0) - ln_b - 1.5 * eps2) / a


def argmin_closed_form(obj: SurrogateObjective) -> tuple[float, float]:
    """Global minimizer of f over (0, inf) and its objective value.

    Returns ``(beta_star, f_star)`` with
    ``beta_star = (s0 / (b * exp(1.5 eps2)))^(1/a)``; this is the unique
    interior critical point for either sign of a.
    """
    ln_beta_star = log_argmin(obj.a, math.log(obj.b), obj.eps2, obj.s0)
    if abs(ln_beta_star) > _LOG_MAX:
        raise SurrogateOverflow(f"argmin exp({ln_beta_star:g}) is not representable")
    beta_star = math.exp(ln_beta_star)
    if beta_star == 0.0:
        raise SurrogateOverflow(f"argmin exp({ln_beta_star:g}) underflows to zero")
    return beta_star, evaluate(obj, beta_star)


def optimal_region(obj: SurrogateObjective, rel: float = 0.10) -> tuple[float, float]:
    """Interval of beta where f stays within ``(1 + rel)`` of its minimum.

    Substituting u = (beta / beta*)^a turns f into the quadratic
    ``s0^2 (m u^2 - 2 m u + 1)`` with ``m = c2^2 / (c1 + c2^2)``, so the
    region boundary solves exactly to ``u = 1 +- sqrt(rel * expm1(eps2))``.
    A degenerate (eps2 = 0) objective has a single-point region; if the
    lower u root is nonpositive the region is unbounded on one side and
    the corresponding endpoint is 0 or inf.
    """
    if rel < 0:
        raise ValueError("rel must be >= 0")
    beta_star, _ = argmin_closed_form(obj)
    du = math.sqrt(rel * math.expm1(obj.eps2))
    if du == 0.0:
        return beta_star, beta_star
    inv_a = 1.0 / obj.a
    hi_edge = beta_star * (1.0 + du) ** inv_a
    if 1.0 - du <= 0.0:
        lo_edge = math.inf if obj.a < 0 else 0.0
    else:
        lo_edge = beta_star * (1.0 - du) ** inv_a
    return min(lo_edge, hi_edge), max(lo_edge, hi_edge)


def thompson_batch(
    fit: glm.GlmFit,
    s0: float,
    batch_size: int,
    bounds: tuple[float, float],
    rng: np.random.Generator,
) -> ThompsonBatch:
    """Draw a synchronous batch of Thompson proposals.

    Each proposal is one posterior draw mapped through the closed-form
    argmin and clamped (in log space, so no intermediate overflow) onto
    ``[beta_min, beta_max]``.  Draws whose exponent is numerically zero,
    or whose objective cannot be evaluated at the clamped point, are
    redrawn; clamping rather than rejection keeps the batch size fixed
    and boundary proposals still carry information.

    Raises
    ------
    DegenerateVariance
        Propagated from posterior sampling when ``fit.s2`` is zero.
    ExhaustedResampling
        More than ``MAX_RESAMPLE_ATTEMPTS`` consecutive unusable draws
        for a single proposal slot.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    beta_min, beta_max = bounds
    if not (0 < beta_min < beta_max < math.inf):
        raise ValueError("bounds must satisfy 0 < beta_min < beta_max < inf")
    ln_lo, ln_hi = math.log(beta_min), math.log(beta_max)

    proposals: list[ThompsonProposal] = []
    clamped = 0
    for _ in range(batch_size):
        for _attempt in range(MAX_RESAMPLE_ATTEMPTS):
            sample = glm.sample_posterior(fit, 1, rng)[0]
            try:
                ln_star = log_argmin(sample.a, sample.ln_b, sample.eps2, s0)
            except DegenerateExponent:
                continue
            if ln_star < ln_lo:
                beta_star, was_clamped = beta_min, True
            elif ln_star > ln_hi:
                beta_star, was_clamped = beta_max, True
            else:
                beta_star, was_clamped = math.exp(ln_star), False
            try:
                f_star = evaluate(SurrogateObjective.from_sample(sample, s0), beta_star)
            except (SurrogateOverflow, OverflowError, ValueError):
                # Wild early-iteration draw (objective astronomically large in
                # bounds, or exp(ln_b) itself unrepresentable); treat it like
                # a degenerate draw.
                continue
            proposals.append(ThompsonProposal(beta_star=beta_star, f_star=f_star, source_sample=sample))
            clamped += int(was_clamped)
            break
        else:
            raise ExhaustedResampling(
                f"{MAX_RESAMPLE_ATTEMPTS} consecutive unusable posterior draws"
            )
    return ThompsonBatch(proposals=proposals, clamped_count=clamped)
