"""Conjugate Bayesian linear model for log-log power-law data.

The statistic ``s`` of a stochastic simulator at scale value ``beta`` is
modelled as

    ln s = a * ln(beta) + ln_b + eps * z,    z ~ N(0, 1),

a linear model in x = (ln beta, 1) with unknown coefficients
theta = (a, ln_b) and noise variance eps^2.  Under the standard
noninformative prior p(theta, eps^2) ~ 1/eps^2 the posterior is conjugate:

    eps^2 | D     ~  scaled-Inv-chi2(n - 2, s2)
    theta | eps^2 ~  N(theta_hat, eps^2 * V_theta)

with theta_hat the least-squares estimate, s2 the classical residual
variance and V_theta = (X^T X)^{-1}.  This module holds the dataset
container, the classical fit, exact posterior sampling and the Student-t
predictive distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateVariance, InsufficientData, RankDeficient

# Number of regression coefficients: slope on ln(beta) plus intercept.
NUM_COEF = 2

# Relative threshold on the R diagonal below which the design is treated
# as rank deficient (beta values numerically identical).
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LogDataset:
    """Paired (beta, s) observations with log-domain design semantics.

    Rows are stored in their raw positive form; the design matrix
    ``x = [ln beta, 1]`` and response ``y = ln s`` are derived views.
    Use :func:`ingest` to build one from possibly dirty points.
    """

    beta: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if beta.ndim != 1 or s.ndim != 1 or beta.size != s.size:
            raise ValueError("beta and s must be 1-D arrays of equal length")
        if beta.size and (not np.all(np.isfinite(beta)) or np.any(beta <= 0)):
            raise ValueError("all beta values must be finite and > 0")
        if s.size and (not np.all(np.isfinite(s)) or np.any(s <= 0)):
            raise ValueError("all s values must be finite and > 0")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.beta.size

    @property
    def x(self) -> np.ndarray:
        """Design matrix of shape (n, 2): columns (ln beta, 1)."""
        return np.column_stack([np.log(self.beta), np.ones(self.n)])

    @property
    def y(self) -> np.ndarray:
        """Response vector ln s."""
        return np.log(self.s)

    def with_observations(self, beta, s) -> "LogDataset":
        """Return a new dataset with the given rows appended."""
        return LogDataset(
            np.concatenate([self.beta, np.asarray(beta, dtype=float)]),
            np.concatenate([self.s, np.asarray(s, dtype=float)]),
        )


@dataclass(frozen=True)
class GlmFit:
    """Classical estimate of the log-log model.

    Attributes
    ----------
    coef_hat : ndarray, shape (2,)
        Point estimate (a_hat, ln_b_hat).
    s2 : float
        Residual variance estimate, >= 0.
    v_theta : ndarray, shape (2, 2)
        Unscaled coefficient covariance (X^T X)^{-1}.
    dof : int
        Residual degrees of freedom, n - 2.
    """

    coef_hat: np.ndarray
    s2: float
    v_theta: np.ndarray
    dof: int

    @property
    def a_hat(self) -> float:
        return float(self.coef_hat[0])

    @property
    def ln_b_hat(self) -> float:
        return float(self.coef_hat[1])


@dataclass(frozen=True)
class GlmPosteriorSample:
    """One exact joint posterior draw (a, ln_b, eps2)."""

    a: float
    ln_b: float
    eps2: float


@dataclass(frozen=True)
class PredictiveDistribution:
    """Multivariate Student-t predictive law of ln s at new beta values.

    ``mean`` is X~ theta_hat, ``scale`` is s2 * (I + X~ V_theta X~^T) and
    ``dof`` the residual degrees of freedom.
    """

    mean: np.ndarray
    scale: np.ndarray
    dof: int


def ingest(points) -> tuple[LogDataset, int]:
    """Build a dataset from (beta, s) pairs, rejecting unusable rows.

    Rows with non-finite entries, beta <= 0, or s <= 0 are excluded and
    counted rather than raised: a zero statistic has no log-domain image,
    and flooring it would bias the fit.

    Parameters
    ----------
    points : iterable of (float, float)
        Raw (beta, s) observations.

    Returns
    -------
    (LogDataset, int)
        The clean dataset and the number of rejected rows.
    """
    betas, ss = [], []
    rejected = 0
    for beta, s in points:
        beta = float(beta)
        s = float(s)
        if not (np.isfinite(beta) and np.isfinite(s)) or beta <= 0 or s <= 0:
            rejected += 1
            continue
        betas.append(beta)
        ss.append(s)
    return LogDataset(np.asarray(betas, dtype=float), np.asarray(ss, dtype=float)), rejected


def fit(data: LogDataset) -> GlmFit:
    """Least-squares fit of the log-log model via QR factorization.

    QR (rather than normal equations) keeps the solve well conditioned
    when beta values cluster tightly, which they do near convergence of
    the optimization loop.

    Raises
    ------
    InsufficientData
        Fewer than 3 rows (residual degrees of freedom would be < 1).
    RankDeficient
        All beta values (numerically) identical.
    """
    if data.n < NUM_COEF + 1:
        raise InsufficientData(f"need at least {NUM_COEF + 1} rows, got {data.n}")
    x = data.x
    y = data.y
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if diag.min() <= RANK_RTOL * diag.max():
        raise RankDeficient("design matrix is rank deficient: beta values are all equal")
    coef = solve_triangular(r, q.T @ y)
    resid = y - x @ coef
    dof = data.n - NUM_COEF
    s2 = float(resid @ resid) / dof
    r_inv = solve_triangular(r, np.eye(NUM_COEF))
    v_theta = r_inv @ r_inv.T
    v_theta = 0.5 * (v_theta + v_theta.T)
    return GlmFit(coef_hat=coef, s2=s2, v_theta=v_theta, dof=dof)


def sample_posterior(fit: GlmFit, count: int, rng: np.random.Generator) -> list[GlmPosteriorSample]:
    """Draw exact i.i.d. samples from the joint conjugate posterior.

    For each draw, eps2 = dof * s2 / x with x ~ chi2(dof) (generated as
    Gamma(dof/2, 2)), then theta ~ N(coef_hat, eps2 * V_theta) through the
    Cholesky factor of V_theta.  The stream is consumed in a fixed order
    (all chi-squared variates, then a (count, 2) block of normals), so a
    fixed seed reproduces draws bit for bit.

    Raises
    ------
    DegenerateVariance
        ``fit.s2`` is zero: the posterior over eps2 collapses and sampling
        zeros would silently disable exploration.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if fit.s2 <= 0.0:
        raise DegenerateVariance("residual variance is zero; posterior over eps2 collapses")
    chi2 = rng.gamma(shape=0.5 * fit.dof, scale=2.0, size=count)
    eps2 = fit.dof * fit.s2 / chi2
    z = rng.standard_normal((count, NUM_COEF))
    root = np.linalg.cholesky(fit.v_theta)
    coefs = fit.coef_hat + np.sqrt(eps2)[:, None] * (z @ root.T)
    return [
        GlmPosteriorSample(a=float(c[0]), ln_b=float(c[1]), eps2=float(e))
        for c, e in zip(coefs, eps2)
    ]


def predict(fit: GlmFit, new_betas) -> PredictiveDistribution:
    """Joint Student-t predictive distribution of ln s at new beta values."""
    arr = np.atleast_1d(np.asarray(new_betas, dtype=float))
    if arr.size == 0:
        raise ValueError("new_betas must be non-empty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("new beta values must be finite and > 0")
    xt = np.column_stack([np.log(arr), np.ones(arr.size)])
    mean = xt @ fit.coef_hat
    scale = fit.s2 * (np.eye(arr.size) + xt @ fit.v_theta @ xt.T)
    scale = 0.5 * (scale + scale.T)
    return PredictiveDistribution(mean=mean, scale=scale, dof=fit.dof)


def save_csv(data: LogDataset, path) -> None:
    """Write the raw observations as ``beta,s`` CSV (UTF-8, LF endings)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "s"])
        for beta, s in zip(data.beta, data.s):
            writer.writerow([repr(float(beta)), repr(float(s))])


def load_csv(path) -> tuple[LogDataset, int]:
    """Read a ``beta,s`` CSV written by :func:`save_csv` (or by hand).

    Returns the dataset plus the count of rejected rows, exactly as
    :func:`ingest` does.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["beta", "s"]:
            raise ValueError(f"{path}: expected header 'beta,s'")
        pairs = []
        for row in reader:
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: malformed row {row!r}")
            pairs.append((float(row[0]), float(row[1])))
    return ingest(pairs)
