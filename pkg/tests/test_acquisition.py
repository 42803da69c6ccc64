"""Tests for the analytic objective and the closed-form Thompson step.

The Monte-Carlo oracles draw log-normal multipliers directly; the
numerical argmin oracle is scipy's bounded scalar minimizer over ln beta,
an implementation entirely independent of the closed form it checks.
"""

import math

import numpy as np
import pytest
import scipy.optimize

from scalebo import acquisition, glm
from scalebo.acquisition import SurrogateObjective
from scalebo.errors import (
    DegenerateExponent,
    DegenerateVariance,
    ExhaustedResampling,
    SurrogateOverflow,
)


def numeric_argmin(obj, lo=1e-3, hi=1e6):
    """Independent 1-D minimizer of evaluate() over ln beta."""
    res = scipy.optimize.minimize_scalar(
        lambda u: acquisition.evaluate(obj, math.exp(u)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return math.exp(res.x)


def mc_objective(obj, beta, draws, rng):
    """Monte-Carlo estimate of E|b beta^a zeta - s0|^2, zeta ~ logN(0, eps2)."""
    zeta = np.exp(math.sqrt(obj.eps2) * rng.standard_normal(draws))
    g = (obj.b * beta**obj.a * zeta - obj.s0) ** 2
    return float(g.mean()), float(g.std(ddof=1) / math.sqrt(draws))


def random_triples(count, rng, eps2_low=0.0):
    for _ in range(count):
        sign = rng.choice([-1.0, 1.0])
        yield SurrogateObjective(
            a=float(sign * rng.uniform(0.1, 2.0)),
            b=float(rng.uniform(0.1, 10.0)),
            eps2=float(rng.uniform(eps2_low, 1.0)),
            s0=float(rng.uniform(0.1, 10.0)),
        )


class TestSurrogateObjective:
    def test_cached_coefficients(self):
        obj = SurrogateObjective(a=-0.5, b=2.0, eps2=0.1, s0=0.5)
        assert obj.c1 == pytest.approx(4.0 * (math.exp(0.2) - math.exp(0.1)), rel=1e-14)
        assert obj.c2 == pytest.approx(2.0 * math.exp(0.05), rel=1e-14)

    def test_variance_coefficient_vanishes_only_without_noise(self):
        assert SurrogateObjective(a=1.0, b=1.0, eps2=0.0, s0=1.0).c1 == 0.0
        assert SurrogateObjective(a=1.0, b=1.0, eps2=1e-300, s0=1.0).c1 > 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(a=math.nan, b=1.0, eps2=0.0, s0=1.0),
            dict(a=1.0, b=0.0, eps2=0.0, s0=1.0),
            dict(a=1.0, b=1.0, eps2=-0.1, s0=1.0),
            dict(a=1.0, b=1.0, eps2=0.0, s0=0.0),
        ],
    )
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            SurrogateObjective(**kwargs)


class TestEvaluate:
    def test_deterministic_surrogate_hits_target(self):
        obj = SurrogateObjective(a=1.0, b=1.0, eps2=0.0, s0=1.0)
        assert acquisition.evaluate(obj, 1.0) == 0.0

    def test_matches_monte_carlo_oracle(self):
        obj = SurrogateObjective(a=-0.5, b=2.0, eps2=0.1, s0=0.5)
        mc, _ = mc_objective(obj, 4.0, 10_000_000, np.random.default_rng(0))
        assert acquisition.evaluate(obj, 4.0) == pytest.approx(mc, rel=0.005)

    def test_analytic_equals_monte_carlo_across_triples(self):
        rng = np.random.default_rng(1)
        for obj in random_triples(12, rng):
            beta = float(np.exp(rng.uniform(-2.0, 4.0)))
            mc, se = mc_objective(obj, beta, 1_000_000, rng)
            assert abs(acquisition.evaluate(obj, beta) - mc) <= 3.0 * se

    def test_variance_term_lower_bound(self):
        rng = np.random.default_rng(2)
        for obj in random_triples(20, rng):
            beta = float(np.exp(rng.uniform(-3.0, 5.0)))
            value = acquisition.evaluate(obj, beta)
            assert value >= 0.0
            assert value >= (obj.c2 * beta**obj.a - obj.s0) ** 2 - 1e-12 * value

    def test_overflow_is_an_error_not_infinity(self):
        obj = SurrogateObjective(a=100.0, b=1.0, eps2=0.5, s0=1.0)
        with pytest.raises(SurrogateOverflow):
            acquisition.evaluate(obj, 1e10)
        with pytest.raises(SurrogateOverflow):
            acquisition.evaluate_on_grid(obj, [1.0, 1e10])

    def test_grid_matches_scalar(self):
        obj = SurrogateObjective(a=-0.7, b=3.0, eps2=0.4, s0=2.0)
        betas = np.exp(np.linspace(-2.0, 4.0, 17))
        grid = acquisition.evaluate_on_grid(obj, betas)
        scalar = [acquisition.evaluate(obj, b) for b in betas]
        np.testing.assert_allclose(grid, scalar, rtol=1e-13)


class TestArgminClosedForm:
    def test_noise_free_unit_case(self):
        beta_star, f_star = acquisition.argmin_closed_form(
            SurrogateObjective(a=1.0, b=1.0, eps2=0.0, s0=1.0)
        )
        assert beta_star == pytest.approx(1.0, rel=1e-15)
        assert f_star == 0.0

    def test_reference_case_against_numeric_oracle(self):
        obj = SurrogateObjective(a=-0.5, b=2.0, eps2=0.1, s0=0.5)
        beta_star, f_star = acquisition.argmin_closed_form(obj)
        assert beta_star == pytest.approx(16.0 * math.exp(0.3), rel=1e-12)
        assert beta_star == pytest.approx(numeric_argmin(obj), rel=1e-6)
        assert f_star == pytest.approx(acquisition.evaluate(obj, beta_star), rel=1e-15)

    def test_positive_exponent_branch_against_grid(self):
        # Dense log grid refined by bisection on the sign of the numerical
        # derivative; exercises the a > 0 branch.
        rng = np.random.default_rng(3)
        for _ in range(100):
            obj = SurrogateObjective(
                a=0.7,
                b=float(rng.uniform(0.1, 10.0)),
                eps2=float(rng.uniform(0.0, 1.0)),
                s0=float(rng.uniform(0.1, 10.0)),
            )
            beta_star, _ = acquisition.argmin_closed_form(obj)
            grid = np.exp(np.linspace(math.log(beta_star) - 3, math.log(beta_star) + 3, 100_001))
            values = acquisition.evaluate_on_grid(obj, grid)
            coarse = grid[int(np.argmin(values))]

            def slope(u):
                h = 1e-7
                return acquisition.evaluate(obj, math.exp(u + h)) - acquisition.evaluate(
                    obj, math.exp(u - h)
                )

            lo, hi = math.log(coarse) - 1e-4, math.log(coarse) + 1e-4
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if slope(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            refined = math.exp(0.5 * (lo + hi))
            assert beta_star == pytest.approx(refined, rel=1e-3)

    def test_degenerate_exponent(self):
        with pytest.raises(DegenerateExponent):
            acquisition.argmin_closed_form(SurrogateObjective(a=0.0, b=1.0, eps2=0.1, s0=1.0))
        with pytest.raises(DegenerateExponent):
            acquisition.argmin_closed_form(SurrogateObjective(a=1e-13, b=1.0, eps2=0.1, s0=1.0))

    def test_unrepresentable_argmin(self):
        with pytest.raises(SurrogateOverflow):
            acquisition.argmin_closed_form(
                SurrogateObjective(a=1e-3, b=1.0, eps2=0.0, s0=10.0)
            )

    def test_first_derivative_vanishes_at_argmin(self):
        rng = np.random.default_rng(4)
        for obj in random_triples(20, rng, eps2_low=0.01):
            beta_star, f_star = acquisition.argmin_closed_form(obj)
            h = 1e-5 * beta_star
            deriv = (
                acquisition.evaluate(obj, beta_star + h)
                - acquisition.evaluate(obj, beta_star - h)
            ) / (2 * h)
            curv_scale = (
                acquisition.evaluate(obj, beta_star + h)
                - 2 * f_star
                + acquisition.evaluate(obj, beta_star - h)
            ) / h**2
            assert abs(deriv) <= 1e-4 * max(abs(curv_scale) * beta_star, 1e-300)

    def test_monotone_on_both_sides(self):
        rng = np.random.default_rng(5)
        for obj in random_triples(10, rng, eps2_low=0.01):
            beta_star, _ = acquisition.argmin_closed_form(obj)
            left = beta_star * np.exp(np.linspace(-2.0, -1e-3, 50))
            right = beta_star * np.exp(np.linspace(1e-3, 2.0, 50))
            assert np.all(np.diff(acquisition.evaluate_on_grid(obj, left)) < 0)
            assert np.all(np.diff(acquisition.evaluate_on_grid(obj, right)) > 0)

    def test_argmin_invariant_under_joint_rescaling(self):
        obj = SurrogateObjective(a=-0.8, b=1.7, eps2=0.3, s0=2.2)
        beta_star, _ = acquisition.argmin_closed_form(obj)
        for c in (0.1, 3.0, 250.0):
            scaled = SurrogateObjective(a=-0.8, b=c * 1.7, eps2=0.3, s0=c * 2.2)
            scaled_star, _ = acquisition.argmin_closed_form(scaled)
            assert scaled_star == pytest.approx(beta_star, rel=1e-12)


class TestOptimalRegion:
    def test_matches_numeric_scan(self):
        obj = SurrogateObjective(a=-0.58, b=1.0, eps2=0.25, s0=0.1)
        lo, hi = acquisition.optimal_region(obj, 0.10)
        grid = np.exp(np.linspace(math.log(1.0), math.log(1e4), 2_000_001))
        values = acquisition.evaluate_on_grid(obj, grid)
        inside = grid[values <= 1.1 * values.min()]
        assert lo == pytest.approx(inside.min(), rel=1e-4)
        assert hi == pytest.approx(inside.max(), rel=1e-4)

    def test_noise_free_region_is_a_point(self):
        obj = SurrogateObjective(a=-0.5, b=2.0, eps2=0.0, s0=0.5)
        lo, hi = acquisition.optimal_region(obj, 0.10)
        assert lo == hi == pytest.approx(16.0, rel=1e-12)


def fitted_model(n=10_000, a=-0.58, eps=0.5, seed=5):
    rng = np.random.default_rng(seed)
    beta = np.exp(rng.uniform(math.log(10.0), math.log(1000.0), n))
    s = np.exp(a * np.log(beta) + eps * rng.standard_normal(n))
    data, _ = glm.ingest(zip(beta, s))
    return glm.fit(data)


class TestThompsonBatch:
    def test_tight_posterior_concentrates_on_point_estimate(self):
        fit = fitted_model()
        obj = SurrogateObjective(a=fit.a_hat, b=math.exp(fit.ln_b_hat), eps2=fit.s2, s0=0.1)
        center, _ = acquisition.argmin_closed_form(obj)
        batch = acquisition.thompson_batch(fit, 0.1, 10, (1.0, 1e4), np.random.default_rng(9))
        np.testing.assert_allclose(batch.betas, center, rtol=0.05)

    def test_cardinality_and_bounds(self):
        fit = fitted_model(n=60)
        batch = acquisition.thompson_batch(fit, 0.1, 10, (50.0, 200.0), np.random.default_rng(1))
        assert len(batch.proposals) == 10
        assert all(50.0 <= b <= 200.0 for b in batch.betas)
        assert all(p.f_star >= 0.0 for p in batch.proposals)

    def test_clamp_saturation(self):
        # Near-degenerate posterior whose argmin (about 101) sits far above
        # the feasible interval: every proposal is projected to the upper
        # bound and counted.
        fit = glm.GlmFit(
            coef_hat=np.array([-0.5798, 0.0]),
            s2=1e-18,
            v_theta=np.diag([1e-18, 1e-18]),
            dof=1000,
        )
        s0 = math.exp(1.5e-18 - 0.5798 * math.log(101.0))
        batch = acquisition.thompson_batch(fit, s0, 10, (50.0, 60.0), np.random.default_rng(2))
        assert batch.betas == [60.0] * 10
        assert batch.clamped_count == 10

    def test_degenerate_variance_propagates(self):
        fit = glm.GlmFit(
            coef_hat=np.array([-0.5, 0.0]), s2=0.0, v_theta=np.eye(2), dof=10
        )
        with pytest.raises(DegenerateVariance):
            acquisition.thompson_batch(fit, 1.0, 5, (1.0, 10.0), np.random.default_rng(0))

    def test_exhausted_resampling_on_flat_posterior(self):
        # Posterior mass collapsed onto a = 0: every draw is degenerate.
        fit = glm.GlmFit(
            coef_hat=np.array([0.0, 0.0]),
            s2=1e-300,
            v_theta=np.diag([1e-300, 1e-300]),
            dof=10,
        )
        with pytest.raises(ExhaustedResampling):
            acquisition.thompson_batch(fit, 1.0, 1, (1.0, 10.0), np.random.default_rng(0))

    def test_seed_determinism(self):
        fit = fitted_model(n=200)
        first = acquisition.thompson_batch(fit, 0.1, 8, (1.0, 1e4), np.random.default_rng(3))
        second = acquisition.thompson_batch(fit, 0.1, 8, (1.0, 1e4), np.random.default_rng(3))
        assert first.betas == second.betas
        assert first.clamped_count == second.clamped_count
