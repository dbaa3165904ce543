"""Tests for competitors.py module."""
import math

import numpy as np
import pytest

from checkshrink import competitors
from checkshrink.check_loss import (
    HyperParams,
    ProblemInstance,
    ShrinkageClass,
    TruthInstance,
    risk_table,
    shrinkage_alpha,
)
from checkshrink.competitors import (
    ORACLE_GRID_POINTS,
    UndefinedMetricError,
    ebml_datadriven,
    ebml_grandmean,
    ebml_origin,
    ebml_select,
    ebmm_datadriven,
    ebmm_grandmean,
    ebmm_origin,
    ebmm_select,
    fine_grid,
    inefficiency,
    loss_table,
    oracle_select,
    unshrunken,
)
from checkshrink.experiments import gen_example1
from checkshrink.grids import m_hat_interval
from checkshrink.stats_core import RngSeed


def _homoscedastic(n=200, sigma=0.4, mean=0.0, spread=1.5, seed=0):
    generator = RngSeed(seed).generator()
    b = generator.uniform(0.3, 0.9, n)
    x = mean + generator.normal(0.0, spread, n)
    return ProblemInstance(x=x, sigma_p=sigma, sigma_f=1.0, b=b, h=1.0 - b)


def _heteroscedastic(n=150, seed=1):
    generator = RngSeed(seed).generator()
    sigma_p = generator.uniform(0.1, 1.0, n)
    theta = generator.normal(0.8, 1.0, n)
    b = generator.uniform(0.4, 0.95, n)
    x = theta + np.sqrt(sigma_p) * generator.standard_normal(n)
    return ProblemInstance(x=x, sigma_p=sigma_p, sigma_f=1.0, b=b, h=1.0 - b)


def _nll(resid, sigma_p, tau):
    return np.mean(resid**2 / (tau + sigma_p) + np.log(tau + sigma_p))


class TestMaximumLikelihood:
    """Test cases for the marginal likelihood selectors."""

    def test_homoscedastic_closed_form(self):
        """Test the stationary point max(mean x^2 - sigma, 0)."""
        inst = _homoscedastic()
        result = ebml_origin(inst)
        assert result.method == "EBML"
        assert result.hp.tau == pytest.approx(max(np.mean(inst.x**2) - 0.4, 0.0), abs=1e-6)
        assert result.objective_value == pytest.approx(_nll(inst.x, inst.sigma_p, result.hp.tau))

    def test_zero_data(self):
        """Test that zero observations give full shrinkage."""
        inst = ProblemInstance(x=np.zeros(30), sigma_p=0.5, sigma_f=1.0, b=0.6, h=0.4)
        assert ebml_origin(inst).hp.tau == pytest.approx(0.0, abs=1e-9)

    def test_permutation_invariant(self):
        """Test invariance under a joint permutation of observations and variances."""
        inst = _heteroscedastic()
        order = RngSeed(3).generator().permutation(inst.n)
        permuted = ProblemInstance(inst.x[order], inst.sigma_p[order], inst.sigma_f[order], inst.b[order], inst.h[order])
        assert ebml_origin(permuted).hp.tau == pytest.approx(ebml_origin(inst).hp.tau, rel=1e-6)

    def test_heteroscedastic_against_brute_force(self):
        """Test that no point of a dense tau grid beats the selected value."""
        inst = _heteroscedastic()
        result = ebml_origin(inst)
        brute = min(_nll(inst.x, inst.sigma_p, tau) for tau in np.linspace(0.0, 20.0, 2001))
        assert result.objective_value <= brute + 1e-10

    def test_grand_mean_centres(self):
        """Test the grand-mean class on centred observations."""
        inst = _homoscedastic(mean=5.0)
        result = ebml_grandmean(inst)
        resid = inst.x - inst.x_bar
        assert result.hp.class_tag is ShrinkageClass.GRAND_MEAN
        assert result.hp.tau == pytest.approx(max(np.mean(resid**2) - 0.4, 0.0), abs=1e-6)

    def test_datadriven_homoscedastic(self):
        """Test that equal variances make the location the sample mean."""
        inst = _homoscedastic(mean=0.3)
        lo, hi = m_hat_interval(inst)
        assert lo <= inst.x_bar <= hi
        result = ebml_datadriven(inst)
        assert result.hp.eta == pytest.approx(inst.x_bar)
        assert result.hp.tau == pytest.approx(max(np.mean((inst.x - inst.x_bar) ** 2) - 0.4, 0.0), abs=1e-6)

    def test_datadriven_clips_location(self):
        """Test that a mean outside the quantile interval is clipped to its edge."""
        x = np.concatenate((np.zeros(19), [100.0]))
        b = np.linspace(0.3, 0.6, 20)
        inst = ProblemInstance(x=x, sigma_p=0.5, sigma_f=1.0, b=b, h=1.0 - b)
        result = ebml_datadriven(inst)
        assert result.hp.eta == pytest.approx(m_hat_interval(inst)[1])
        assert result.hp.eta == pytest.approx(0.0)

    def test_datadriven_against_brute_force(self):
        """Test the profile minimum against a dense grid."""
        inst = _heteroscedastic()
        lo, hi = m_hat_interval(inst)
        result = ebml_datadriven(inst)

        def profile(tau):
            weights = 1.0 / (tau + inst.sigma_p)
            eta = np.clip(np.sum(weights * inst.x) / np.sum(weights), lo, hi)
            return _nll(inst.x - eta, inst.sigma_p, tau)

        brute = min(profile(tau) for tau in np.linspace(0.0, 20.0, 2001))
        assert result.objective_value <= brute + 1e-10
        assert lo <= result.hp.eta <= hi


class TestMethodOfMoments:
    """Test cases for the moment selectors."""

    def test_origin_values(self):
        """Test zero data, exact cancellation and the positive part."""
        assert ebmm_origin(ProblemInstance(np.zeros(5), 0.5, 1.0, 0.5, 0.5)).hp.tau == 0.0
        exact = ProblemInstance([0.5, 1.0, 2.0], [0.25, 1.0, 4.0], 1.0, 0.5, 0.5)
        assert ebmm_origin(exact).hp.tau == 0.0
        inst = _homoscedastic(spread=2.0)
        assert ebmm_origin(inst).hp.tau == pytest.approx(np.mean(inst.x**2) - 0.4)
        assert ebmm_origin(inst).method == "EBMM"

    def test_grand_mean(self):
        """Test the n - 1 moment equation on centred data."""
        inst = _homoscedastic(mean=2.0, spread=1.5)
        resid = inst.x - inst.x_bar
        expected = (np.sum(resid**2) - (1 - 1 / inst.n) * np.sum(inst.sigma_p)) / (inst.n - 1)
        assert ebmm_grandmean(inst).hp.tau == pytest.approx(expected)

    def test_datadriven_fixed_point(self):
        """Test the homoscedastic fixed point eta = mean, tau from the moment equation."""
        inst = _homoscedastic(mean=0.2, spread=1.5)
        result = ebmm_datadriven(inst)
        resid = inst.x - inst.x_bar
        expected = (np.sum(resid**2) - (1 - 1 / inst.n) * np.sum(inst.sigma_p)) / (inst.n - 1)
        assert result.hp.eta == pytest.approx(inst.x_bar)
        assert result.hp.tau == pytest.approx(expected)
        assert result.warnings == []

    def test_datadriven_constant_data(self):
        """Test that constant data give no spread and the constant as location."""
        inst = ProblemInstance(x=np.full(12, 3.0), sigma_p=0.5, sigma_f=1.0, b=np.linspace(0.3, 0.7, 12), h=0.5)
        result = ebmm_datadriven(inst)
        assert result.hp.tau == 0.0
        assert result.hp.eta == pytest.approx(3.0)

    def test_datadriven_iteration_cap(self, monkeypatch):
        """Test that an unsettled iteration returns with a warning."""
        monkeypatch.setattr(competitors, "MM_MAX_ITERATIONS", 1)
        inst = _heteroscedastic()
        result = ebmm_datadriven(inst)
        assert math.isfinite(result.hp.tau)
        assert any("did not settle" in warning for warning in result.warnings)

    def test_datadriven_settles_on_heteroscedastic_data(self):
        """Test that the default cap is enough on ordinary data."""
        assert ebmm_datadriven(_heteroscedastic()).warnings == []

    @pytest.mark.parametrize("class_tag", list(ShrinkageClass))
    def test_dispatch(self, class_tag):
        """Test that both selectors honour the requested class."""
        inst = _homoscedastic()
        assert ebml_select(inst, class_tag).hp.class_tag is class_tag
        assert ebmm_select(inst, class_tag.value).hp.class_tag is class_tag

    def test_unshrunken(self):
        """Test the no-shrinkage rule."""
        result = unshrunken(_homoscedastic(), "grandmean")
        assert result.hp.tau == math.inf
        assert result.hp.class_tag is ShrinkageClass.GRAND_MEAN
        assert math.isnan(result.objective_value)


class TestOracles:
    """Test cases for the oracle selectors and the inefficiency metric."""

    def test_fine_grid(self):
        """Test the evaluation grid's size and ends."""
        inst = _homoscedastic()
        grid = fine_grid(inst)
        assert grid.tau_points.size == ORACLE_GRID_POINTS
        assert grid.tau_points[0] == 0.0
        assert math.isinf(grid.tau_points[-1])
        lo, hi = m_hat_interval(inst)
        etas = fine_grid(inst, "datadriven").eta_points
        assert etas.min() == pytest.approx(lo)
        assert etas.max() == pytest.approx(hi)

    def test_example_one_risk_oracle(self):
        """Test the risk oracle's tau on the two-group benchmark."""
        truth, inst = gen_example1(100, RngSeed(0))
        result = oracle_select(truth, inst, "origin", "Risk")
        assert result.method == "OracleRisk"
        assert result.hp.tau == pytest.approx(0.3714, abs=0.002)
        assert shrinkage_alpha(result.hp.tau, 1.0 / 3.0) == pytest.approx(0.5271, abs=0.001)

    def test_single_coordinate_oracle(self):
        """Test the risk oracle at theta = 1/sqrt(3) with b_tilde = 0.51."""
        inst = ProblemInstance(x=[0.0], sigma_p=1.0 / 3.0, sigma_f=1.0, b=0.51, h=0.49)
        result = oracle_select(TruthInstance([1.0 / math.sqrt(3.0)]), inst, "origin")
        assert shrinkage_alpha(result.hp.tau, 1.0 / 3.0) == pytest.approx(0.51, abs=0.03)

    def test_zero_truth(self):
        """Test that zero means are best served by full shrinkage."""
        inst = _homoscedastic()
        result = oracle_select(TruthInstance(np.zeros(inst.n)), inst, "origin")
        assert result.hp.tau == 0.0

    def test_loss_oracle_is_minimum(self):
        """Test that the loss oracle's value is the smallest on its grid."""
        inst = _heteroscedastic()
        truth = TruthInstance(RngSeed(4).generator().normal(0.8, 1.0, inst.n))
        grid = fine_grid(inst, points=201)
        result = oracle_select(truth, inst, "origin", "Loss", grid)
        table = loss_table(truth, inst, "origin", grid.tau_points)
        assert result.method == "OracleLoss"
        assert np.all(result.objective_value <= table)

    def test_datadriven_oracle(self):
        """Test that the data-driven oracle picks a point of the product grid."""
        inst = _heteroscedastic()
        truth = TruthInstance(RngSeed(4).generator().normal(0.8, 1.0, inst.n))
        grid = fine_grid(inst, "datadriven", points=101, eta_points=21)
        result = oracle_select(truth, inst, "datadriven", "Risk", grid)
        table = risk_table(truth, inst, "datadriven", grid.tau_points, grid.eta_points)
        assert result.objective_value == table.min()
        assert result.hp.eta in grid.eta_points

    def test_bad_objective(self):
        """Test that only Loss and Risk are accepted."""
        inst = _homoscedastic()
        with pytest.raises(ValueError):
            oracle_select(TruthInstance(inst.x), inst, "origin", "Median")

    def test_inefficiency_extremes(self):
        """Test 0% at the risk oracle and 100% at the curve's maximum."""
        truth, inst = gen_example1(100, RngSeed(0))
        grid = fine_grid(inst)
        best = oracle_select(truth, inst, "origin", "Risk", grid)
        assert inefficiency(truth, inst, best.hp, grid) == pytest.approx(0.0, abs=1e-9)
        table = risk_table(truth, inst, "origin", grid.tau_points)
        worst = HyperParams(float(grid.tau_points[int(np.argmax(table))]))
        assert inefficiency(truth, inst, worst, grid) == pytest.approx(100.0)

    def test_inefficiency_in_range(self):
        """Test that grid points land in [0, 100]."""
        truth, inst = gen_example1(100, RngSeed(1))
        grid = fine_grid(inst, points=101)
        for tau in grid.tau_points[::10]:
            assert 0.0 <= inefficiency(truth, inst, HyperParams(float(tau)), grid) <= 100.0

    def test_flat_risk(self):
        """Test that a flat risk curve has no inefficiency."""
        inst = ProblemInstance(x=[0.2, -0.1, 0.4], sigma_p=1e-20, sigma_f=1.0, b=0.6, h=0.4)
        with pytest.raises(UndefinedMetricError):
            inefficiency(TruthInstance(np.zeros(3)), inst, HyperParams(1.0))

    @pytest.mark.slow
    def test_example_one_ml_inefficiency(self):
        """Test the likelihood selector's average inefficiency on the two-group benchmark."""
        values, taus = [], []
        for rep in range(50):
            truth, inst = gen_example1(100, RngSeed(77).derive(rep))
            result = ebml_origin(inst)
            taus.append(result.hp.tau)
            values.append(inefficiency(truth, inst, result.hp))
        assert np.mean(taus) == pytest.approx(3.0, abs=0.5)
        assert np.mean(values) == pytest.approx(48.0, abs=8.0)
