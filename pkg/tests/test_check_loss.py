"""Tests for check_loss.py module."""
import math

import numpy as np
import pytest
from scipy import stats

from checkshrink.check_loss import (
    HyperParams,
    InvalidInstanceError,
    ProblemInstance,
    ShrinkageClass,
    TruthInstance,
    bayes_predict,
    coord_risk,
    cumulative_loss,
    expected_check_loss,
    g_fn,
    predict_class,
    realized_check_loss,
    risk_params,
    risk_table,
    shrinkage_alpha,
    total_risk,
)
from checkshrink.stats_core import DomainError, RngSeed, norm_cdf, norm_pdf, norm_quantile


@pytest.fixture
def small_instance():
    """Five heteroscedastic coordinates with mixed cost weights."""
    inst = ProblemInstance(
        x=[0.4, -1.2, 2.0, 0.1, 0.9],
        sigma_p=[0.3, 0.5, 0.2, 0.4, 0.25],
        sigma_f=[1.0, 0.8, 1.5, 1.0, 0.6],
        b=[0.6, 0.9, 0.55, 0.7, 2.0],
        h=[0.4, 0.1, 0.45, 0.3, 1.0],
    )
    truth = TruthInstance([0.5, -1.0, 1.6, 0.0, 1.1])
    return inst, truth


def _tau_for_alpha(alpha, sigma_p):
    return math.inf if alpha >= 1.0 else alpha * sigma_p / (1.0 - alpha)


class TestProblemInstance:
    """Test cases for the instance types."""

    def test_scalars_broadcast(self):
        """Test that scalar variances and weights are spread over every coordinate."""
        inst = ProblemInstance(x=[1.0, 2.0, 3.0], sigma_p=0.5, sigma_f=1.0, b=0.7, h=0.3)
        assert inst.n == 3
        assert np.array_equal(inst.sigma_p, [0.5, 0.5, 0.5])
        assert np.allclose(inst.b_tilde, 0.7)
        assert np.allclose(inst.cost_scale, 1.0)
        assert inst.x_bar == pytest.approx(2.0)

    def test_arrays_are_read_only(self):
        """Test that stored vectors cannot be mutated."""
        inst = ProblemInstance(x=[1.0, 2.0], sigma_p=1.0, sigma_f=1.0, b=1.0, h=1.0)
        with pytest.raises(ValueError):
            inst.x[0] = 5.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"x": [], "sigma_p": 1.0, "sigma_f": 1.0, "b": 1.0, "h": 1.0},
            {"x": [1.0, 2.0], "sigma_p": [1.0, 0.0], "sigma_f": 1.0, "b": 1.0, "h": 1.0},
            {"x": [1.0, 2.0], "sigma_p": 1.0, "sigma_f": 1.0, "b": -1.0, "h": 1.0},
            {"x": [1.0, 2.0], "sigma_p": [1.0, 1.0, 1.0], "sigma_f": 1.0, "b": 1.0, "h": 1.0},
            {"x": [1.0, float("nan")], "sigma_p": 1.0, "sigma_f": 1.0, "b": 1.0, "h": 1.0},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that empty, non-positive, mis-sized and non-finite inputs are rejected."""
        with pytest.raises(InvalidInstanceError):
            ProblemInstance(**kwargs)

    def test_shifted(self):
        """Test that shifting moves observations only."""
        inst = ProblemInstance(x=[1.0, 2.0], sigma_p=0.5, sigma_f=1.0, b=0.7, h=0.3)
        moved = inst.shifted(1.5)
        assert np.allclose(moved.x, [-0.5, 0.5])
        assert np.array_equal(moved.sigma_p, inst.sigma_p)

    def test_truth_length_checked(self, small_instance):
        """Test that a truth of the wrong length is reported."""
        inst, _ = small_instance
        with pytest.raises(InvalidInstanceError):
            TruthInstance([1.0, 2.0]).check(inst)

    def test_hyperparams(self):
        """Test the tau range and the origin-class location constraint."""
        assert HyperParams(math.inf).tau == math.inf
        assert HyperParams(1.0, 2.0, "datadriven").class_tag is ShrinkageClass.DATA_DRIVEN
        with pytest.raises(InvalidInstanceError):
            HyperParams(-0.1)
        with pytest.raises(InvalidInstanceError):
            HyperParams(float("nan"))
        with pytest.raises(InvalidInstanceError):
            HyperParams(1.0, 0.5, ShrinkageClass.ORIGIN)


class TestGFunction:
    """Test cases for the G function."""

    def test_value_at_zero(self):
        """Test that G(0, beta) is phi(0)."""
        assert g_fn(0.0, 0.7) == pytest.approx(0.3989422804, abs=1e-10)

    @pytest.mark.parametrize("beta", [0.05, 0.3, 0.51, 0.9, 0.99])
    def test_minimum(self, beta):
        """Test that the minimum phi(Phi^-1(beta)) sits at Phi^-1(beta)."""
        w_star = norm_quantile(beta)
        minimum = g_fn(w_star, beta)
        assert minimum == pytest.approx(norm_pdf(w_star), abs=1e-14)
        grid = np.linspace(w_star - 3.0, w_star + 3.0, 601)
        assert np.all(g_fn(grid, beta) >= minimum - 1e-14)

    def test_against_simulation(self):
        """Test G(2, 0.4) against a simulated expected check loss."""
        z = RngSeed(101).generator().standard_normal(1_000_000)
        draws = 0.4 * np.maximum(z - 2.0, 0.0) + 0.6 * np.maximum(2.0 - z, 0.0)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(g_fn(2.0, 0.4) - draws.mean()) < 4 * se

    def test_tails(self):
        """Test the linear asymptotes past the tail switch."""
        assert g_fn(50.0, 0.3) == pytest.approx(0.7 * 50.0)
        assert g_fn(-50.0, 0.3) == pytest.approx(0.3 * 50.0)
        assert g_fn(39.9, 0.3) == pytest.approx(0.7 * 39.9, rel=1e-12)

    @pytest.mark.parametrize("beta", [0.1, 0.5, 0.95])
    def test_convex(self, beta):
        """Test that second differences are non-negative."""
        values = g_fn(np.linspace(-45.0, 45.0, 9001), beta)
        assert np.min(np.diff(values, 2)) >= -1e-10

    @pytest.mark.parametrize("beta", [0.0, 1.0, 1.2])
    def test_beta_domain(self, beta):
        """Test that beta outside (0, 1) is rejected."""
        with pytest.raises(DomainError):
            g_fn(0.0, beta)


class TestLosses:
    """Test cases for expected and realised check loss."""

    def test_optimum(self):
        """Test that the optimal stock gives (b + h) phi(Phi^-1(b_tilde))."""
        b, h = 3.0, 1.0
        z = norm_quantile(0.75)
        assert expected_check_loss(0.0, 1.0, b, h, z) == pytest.approx(4.0 * norm_pdf(z), abs=1e-13)

    def test_scaling(self):
        """Test the square-root scaling in the future variance."""
        assert expected_check_loss(0.8, 4.0, 2.0, 1.0, 1.4) == pytest.approx(
            2.0 * expected_check_loss(0.4, 1.0, 2.0, 1.0, 0.7), rel=1e-12
        )

    def test_against_simulation(self):
        """Test the closed form at (1, 0.5, 2, 1, 1.3) against simulated demand."""
        y = 1.0 + math.sqrt(0.5) * RngSeed(202).generator().standard_normal(1_000_000)
        draws = 2.0 * np.maximum(y - 1.3, 0.0) + np.maximum(1.3 - y, 0.0)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(expected_check_loss(1.0, 0.5, 2.0, 1.0, 1.3) - draws.mean()) < 3 * se

    def test_random_tuples_against_simulation(self):
        """Test the loss identity on random parameter tuples."""
        generator = RngSeed(303).generator()
        for _ in range(20):
            theta, q = generator.normal(0.0, 2.0, 2)
            sigma, b, h = generator.uniform(0.2, 3.0, 3)
            y = theta + math.sqrt(sigma) * generator.standard_normal(200_000)
            draws = b * np.maximum(y - q, 0.0) + h * np.maximum(q - y, 0.0)
            se = draws.std(ddof=1) / math.sqrt(draws.size)
            assert abs(expected_check_loss(theta, sigma, b, h, q) - draws.mean()) < 4 * se

    def test_realized(self):
        """Test the realised loss on hand-computed values."""
        assert realized_check_loss([3.0, 1.0], [2.0, 2.0], 2.0, 0.5) == pytest.approx((2.0 + 0.5) / 2)


class TestBayesRule:
    """Test cases for the Bayes predictor and the class predictors."""

    def test_alpha(self):
        """Test the shrinkage factor at the extremes."""
        assert shrinkage_alpha(0.0, 0.5) == 0.0
        assert shrinkage_alpha(math.inf, 0.5) == 1.0
        assert shrinkage_alpha(0.5, 0.5) == 0.5

    def test_extremes(self):
        """Test full shrinkage at tau = 0 and none at tau = inf."""
        z = norm_quantile(0.7)
        assert bayes_predict(2.0, -1.0, 0.0, 0.5, 1.5, 0.7, 0.3) == pytest.approx(-1.0 + math.sqrt(1.5) * z)
        assert bayes_predict(2.0, -1.0, math.inf, 0.5, 1.5, 0.7, 0.3) == pytest.approx(2.0 + math.sqrt(2.0) * z)

    def test_worked_value(self):
        """Test x = 1, eta = 0, tau = 0.35, sigma_p = 1/3, sigma_f = 1, b_tilde = 0.51."""
        alpha = 0.35 / (0.35 + 1.0 / 3.0)
        expected = alpha + math.sqrt(1.0 + alpha / 3.0) * stats.norm.ppf(0.51)
        assert alpha == pytest.approx(0.512, abs=1e-3)
        assert bayes_predict(1.0, 0.0, 0.35, 1.0 / 3.0, 1.0, 0.51, 0.49) == pytest.approx(expected, abs=1e-12)

    def test_posterior_predictive_quantile(self):
        """Test that the rule is the b_tilde quantile of the posterior predictive."""
        x, eta, tau, sigma_p, sigma_f, b, h = 0.7, 0.2, 0.9, 0.4, 1.3, 0.8, 0.2
        alpha = tau / (tau + sigma_p)
        mean = alpha * x + (1 - alpha) * eta
        spread = math.sqrt(sigma_f + alpha * sigma_p)
        q = bayes_predict(x, eta, tau, sigma_p, sigma_f, b, h)
        assert norm_cdf((q - mean) / spread) == pytest.approx(0.8, abs=1e-12)

    def test_origin_single_coordinate(self):
        """Test the origin class with full shrinkage."""
        inst = ProblemInstance(x=[3.0], sigma_p=0.5, sigma_f=2.0, b=0.9, h=0.1)
        q = predict_class(inst, HyperParams(0.0))
        assert q == pytest.approx([math.sqrt(2.0) * norm_quantile(0.9)])

    def test_grand_mean_constant_data(self):
        """Test that identical observations are the grand-mean class's target."""
        inst = ProblemInstance(x=[1.5] * 4, sigma_p=0.5, sigma_f=[1.0, 2.0, 0.5, 1.0], b=[0.6, 0.7, 0.8, 0.9], h=0.3)
        q = predict_class(inst, HyperParams(0.0, class_tag=ShrinkageClass.GRAND_MEAN))
        expected = 1.5 + np.sqrt(inst.sigma_f) * norm_quantile(inst.b_tilde)
        assert np.allclose(q, expected)

    def test_location_equivariance(self, small_instance):
        """Test that shifting data and location shifts the predictions."""
        inst, _ = small_instance
        base = predict_class(inst, HyperParams(0.6, 0.3, ShrinkageClass.DATA_DRIVEN))
        moved = predict_class(inst.with_x(inst.x + 2.5), HyperParams(0.6, 2.8, ShrinkageClass.DATA_DRIVEN))
        assert np.allclose(moved, base + 2.5, atol=1e-12)

    def test_cumulative_loss_at_optimum(self, small_instance):
        """Test that stocking at the true quantile gives the minimum loss."""
        inst, truth = small_instance
        q = truth.theta + np.sqrt(inst.sigma_f) * norm_quantile(inst.b_tilde)
        expected = np.mean(inst.cost_scale * np.sqrt(inst.sigma_f) * norm_pdf(norm_quantile(inst.b_tilde)))
        assert cumulative_loss(truth, inst, q) == pytest.approx(expected, rel=1e-12)

    def test_cumulative_loss_shape(self, small_instance):
        """Test that a mis-sized prediction vector is rejected."""
        inst, truth = small_instance
        with pytest.raises(InvalidInstanceError):
            cumulative_loss(truth, inst, np.zeros(3))


class TestRisk:
    """Test cases for the closed-form risk."""

    def test_unbiased_rule_ignores_theta(self):
        """Test that the risk at tau = inf does not depend on theta."""
        c, d, scale = risk_params(math.inf, 0.5, 1.0, 0.8)
        assert d == 0.0
        assert c == pytest.approx(norm_quantile(0.8))
        assert coord_risk(-4.0, math.inf, 0.5, 1.0, 0.8, 0.2) == pytest.approx(coord_risk(7.0, math.inf, 0.5, 1.0, 0.8, 0.2))

    def test_moderate_mean_minimiser(self):
        """Test that theta = 1/sqrt(3) with b_tilde = 0.51 is best served near alpha = 0.51."""
        alphas = np.linspace(0.0, 1.0, 1001)
        risks = [coord_risk(1 / math.sqrt(3), _tau_for_alpha(a, 1 / 3), 1 / 3, 1.0, 0.51, 0.49) for a in alphas]
        assert alphas[int(np.argmin(risks))] == pytest.approx(0.51, abs=0.03)

    def test_distant_mean_minimiser(self):
        """Test that theta = -3 sqrt(3) with b_tilde = 0.99 is best left unshrunk."""
        alphas = np.linspace(0.0, 1.0, 101)
        risks = [coord_risk(-3 * math.sqrt(3), _tau_for_alpha(a, 1 / 3), 1 / 3, 1.0, 0.99, 0.01) for a in alphas]
        assert alphas[int(np.argmin(risks))] >= 0.95

    def test_total_risk_single_coordinate(self):
        """Test that one coordinate reduces to the coordinate risk."""
        inst = ProblemInstance(x=[0.0], sigma_p=0.4, sigma_f=1.2, b=0.7, h=0.5)
        truth = TruthInstance([0.9])
        assert total_risk(truth, inst, HyperParams(0.8)) == pytest.approx(coord_risk(0.9, 0.8, 0.4, 1.2, 0.7, 0.5))

    @pytest.mark.parametrize(
        "hp",
        [HyperParams(0.7), HyperParams(0.0), HyperParams(0.7, 0.5, ShrinkageClass.DATA_DRIVEN)],
    )
    def test_total_risk_against_simulation(self, small_instance, hp):
        """Test the closed-form risk against simulated observations."""
        inst, truth = small_instance
        generator = RngSeed(404).generator()
        losses = np.empty(4000)
        for rep in range(losses.size):
            x = truth.theta + np.sqrt(inst.sigma_p) * generator.standard_normal(inst.n)
            losses[rep] = cumulative_loss(truth, inst, predict_class(inst.with_x(x), hp))
        se = losses.std(ddof=1) / math.sqrt(losses.size)
        assert abs(total_risk(truth, inst, hp) - losses.mean()) <= 3.5 * se + 1e-12

    def test_grand_mean_uses_centred_truth(self, small_instance):
        """Test that the grand-mean risk shifts theta by its mean."""
        inst, truth = small_instance
        centred = TruthInstance(truth.theta - truth.theta.mean())
        assert total_risk(truth, inst, HyperParams(0.4, class_tag=ShrinkageClass.GRAND_MEAN)) == pytest.approx(
            total_risk(centred, inst, HyperParams(0.4))
        )

    def test_risk_table_matches_total_risk(self, small_instance):
        """Test that tabulated risks agree with pointwise evaluation."""
        inst, truth = small_instance
        taus = np.array([0.0, 0.3, 1.0, math.inf])
        table = risk_table(truth, inst, ShrinkageClass.ORIGIN, taus)
        assert table.shape == (4,)
        assert np.allclose(table, [total_risk(truth, inst, HyperParams(t)) for t in taus])

        etas = np.array([-0.5, 0.0, 0.5])
        product = risk_table(truth, inst, ShrinkageClass.DATA_DRIVEN, taus, etas)
        assert product.shape == (4, 3)
        assert product[1, 2] == pytest.approx(total_risk(truth, inst, HyperParams(0.3, 0.5, ShrinkageClass.DATA_DRIVEN)))
