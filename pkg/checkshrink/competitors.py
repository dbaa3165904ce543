"""Baseline and oracle hyperparameter selectors, and the inefficiency metric."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from checkshrink.check_loss import (
    HyperParams,
    ProblemInstance,
    ShrinkageClass,
    TruthInstance,
    bayes_predict,
    expected_check_loss,
    risk_table,
    total_risk,
)
from checkshrink.grids import Grid, m_hat_interval, to_tau

ML_GRID_POINTS = 1000
ORACLE_GRID_POINTS = 2001
ORACLE_ETA_POINTS = 201
MM_TOLERANCE = 1e-8
MM_MAX_ITERATIONS = 1000


class UndefinedMetricError(ValueError):
    """Raised when a metric's normalisation vanishes."""


@dataclass
class SelectionResult:
    """A selected hyperparameter pair and how it was obtained."""

    method: str
    hp: HyperParams
    objective_value: float
    grid_used: Grid | None = None
    warnings: list = field(default_factory=list)


def _reference_scale(inst: ProblemInstance) -> float:
    return float(np.mean(inst.sigma_p))


def _alpha_to_tau(alpha, scale: float):
    """tau = scale * alpha / (1 - alpha), with alpha = 1 mapped to inf."""
    return np.asarray(to_tau(alpha), dtype=float) * scale


def _marginal_nll(resid: np.ndarray, sigma_p: np.ndarray, tau: float) -> float:
    total = tau + sigma_p
    return float(np.mean(resid**2 / total + np.log(total)))


def _minimise_over_alpha(objective, scale: float) -> tuple[float, float]:
    """Minimise ``objective(tau)`` over tau in [0, inf).

    A 1000-point grid in alpha = tau/(tau + scale) locates the best bracket,
    which a bounded golden-section/Brent search then refines.
    """
    alphas = np.linspace(0.0, 1.0, ML_GRID_POINTS, endpoint=False)
    taus = _alpha_to_tau(alphas, scale)
    values = np.array([objective(tau) for tau in taus])
    j = int(np.argmin(values))
    best_tau, best_value = float(taus[j]), float(values[j])

    lo = alphas[max(j - 1, 0)]
    hi = alphas[j + 1] if j + 1 < alphas.size else 1.0 - 1e-12
    refined = minimize_scalar(
        lambda a: objective(float(_alpha_to_tau(a, scale))),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if refined.success and refined.fun < best_value:
        best_tau, best_value = float(_alpha_to_tau(refined.x, scale)), float(refined.fun)
    return best_tau, best_value


# ORIGIN CLASS

def ebml_origin(inst: ProblemInstance) -> SelectionResult:
    """Marginal maximum likelihood tau for the prior N(0, tau)."""
    tau, value = _minimise_over_alpha(lambda t: _marginal_nll(inst.x, inst.sigma_p, t), _reference_scale(inst))
    return SelectionResult("EBML", HyperParams(tau=tau), value)


def ebmm_origin(inst: ProblemInstance) -> SelectionResult:
    """Method-of-moments tau: max(mean(x^2 - sigma_p), 0)."""
    tau = max(float(np.mean(inst.x**2 - inst.sigma_p)), 0.0)
    return SelectionResult("EBMM", HyperParams(tau=tau), _marginal_nll(inst.x, inst.sigma_p, tau))


# GRAND-MEAN CLASS

def ebml_grandmean(inst: ProblemInstance) -> SelectionResult:
    resid = inst.x - inst.x_bar
    tau, value = _minimise_over_alpha(lambda t: _marginal_nll(resid, inst.sigma_p, t), _reference_scale(inst))
    return SelectionResult("EBML", HyperParams(tau=tau, class_tag=ShrinkageClass.GRAND_MEAN), value)


def _moment_tau(resid: np.ndarray, sigma_p: np.ndarray) -> float:
    n = resid.size
    return max((float(np.sum(resid**2)) - (1.0 - 1.0 / n) * float(np.sum(sigma_p))) / max(n - 1, 1), 0.0)


def ebmm_grandmean(inst: ProblemInstance) -> SelectionResult:
    resid = inst.x - inst.x_bar
    tau = _moment_tau(resid, inst.sigma_p)
    return SelectionResult(
        "EBMM",
        HyperParams(tau=tau, class_tag=ShrinkageClass.GRAND_MEAN),
        _marginal_nll(resid, inst.sigma_p, tau),
    )


# DATA-DRIVEN CLASS

def _location(inst: ProblemInstance, tau: float, interval: tuple[float, float]) -> float:
    """Precision-weighted mean of x clipped into the quantile interval."""
    weights = 1.0 / (tau + inst.sigma_p)
    weighted = float(np.sum(weights * inst.x) / np.sum(weights))
    return float(np.clip(weighted, interval[0], interval[1]))


def ebml_datadriven(inst: ProblemInstance) -> SelectionResult:
    """Profile marginal likelihood over tau with eta = f(tau)."""
    interval = m_hat_interval(inst)

    def profile(tau: float) -> float:
        return _marginal_nll(inst.x - _location(inst, tau, interval), inst.sigma_p, tau)

    tau, value = _minimise_over_alpha(profile, _reference_scale(inst))
    eta = _location(inst, tau, interval)
    return SelectionResult("EBML", HyperParams(tau=tau, eta=eta, class_tag=ShrinkageClass.DATA_DRIVEN), value)


def ebmm_datadriven(inst: ProblemInstance) -> SelectionResult:
    """Alternate the moment equation for tau and eta = f(tau) until tau settles.

    Starts from the origin moment estimate. Stops when successive tau differ
    by less than 1e-8, or after 1000 rounds with a warning.
    """
    interval = m_hat_interval(inst)
    tau = ebmm_origin(inst).hp.tau
    warnings = []
    for _ in range(MM_MAX_ITERATIONS):
        eta = _location(inst, tau, interval)
        new_tau = _moment_tau(inst.x - eta, inst.sigma_p)
        if abs(new_tau - tau) < MM_TOLERANCE:
            tau = new_tau
            break
        tau = new_tau
    else:
        warnings.append(f"data-driven moment iteration did not settle within {MM_MAX_ITERATIONS} rounds")
    eta = _location(inst, tau, interval)
    return SelectionResult(
        "EBMM",
        HyperParams(tau=tau, eta=eta, class_tag=ShrinkageClass.DATA_DRIVEN),
        _marginal_nll(inst.x - eta, inst.sigma_p, tau),
        warnings=warnings,
    )


def ebml_select(inst: ProblemInstance, class_tag) -> SelectionResult:
    class_tag = ShrinkageClass(class_tag)
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        return ebml_datadriven(inst)
    if class_tag is ShrinkageClass.GRAND_MEAN:
        return ebml_grandmean(inst)
    return ebml_origin(inst)


def ebmm_select(inst: ProblemInstance, class_tag) -> SelectionResult:
    class_tag = ShrinkageClass(class_tag)
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        return ebmm_datadriven(inst)
    if class_tag is ShrinkageClass.GRAND_MEAN:
        return ebmm_grandmean(inst)
    return ebmm_origin(inst)


def unshrunken(inst: ProblemInstance, class_tag=ShrinkageClass.ORIGIN) -> SelectionResult:
    """The no-shrinkage rule, tau = inf."""
    hp = HyperParams(tau=float("inf"), class_tag=ShrinkageClass(class_tag))
    return SelectionResult("Unshrunken", hp, float("nan"))


# ORACLES

def fine_grid(
    inst: ProblemInstance,
    class_tag=ShrinkageClass.ORIGIN,
    points: int = ORACLE_GRID_POINTS,
    eta_points: int = ORACLE_ETA_POINTS,
) -> Grid:
    """Evaluation grid equispaced in tau/(tau + mean sigma_p), both ends included."""
    class_tag = ShrinkageClass(class_tag)
    alphas = np.linspace(0.0, 1.0, points)
    etas = None
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        lo, hi = m_hat_interval(inst)
        etas = np.unique(np.linspace(lo, hi, eta_points))
    return Grid(
        tau_points=_alpha_to_tau(alphas, _reference_scale(inst)),
        delta=1.0 / (points - 1),
        a_n=float("nan"),
        constants=None,
        eta_points=etas,
        class_tag=class_tag,
    )


def loss_table(truth: TruthInstance, inst: ProblemInstance, class_tag, taus, etas=None) -> np.ndarray:
    """Cumulative loss over a grid, shaped like ``risk_table``."""
    truth.check(inst)
    class_tag = ShrinkageClass(class_tag)
    taus = np.asarray(taus, dtype=float)[:, None]

    def losses(eta: float) -> np.ndarray:
        q = bayes_predict(inst.x[None, :], eta, taus, inst.sigma_p, inst.sigma_f, inst.b, inst.h)
        return np.mean(expected_check_loss(truth.theta, inst.sigma_f, inst.b, inst.h, q), axis=1)

    if class_tag is ShrinkageClass.DATA_DRIVEN and etas is not None:
        return np.stack([losses(float(eta)) for eta in etas], axis=1)
    return losses(inst.x_bar if class_tag is ShrinkageClass.GRAND_MEAN else 0.0)


def oracle_select(
    truth: TruthInstance,
    inst: ProblemInstance,
    class_tag,
    objective: str = "Risk",
    grid: Grid | None = None,
) -> SelectionResult:
    """Minimise the true loss or risk over a fine grid.

    Ties go to the smaller tau, then the smaller eta.
    """
    class_tag = ShrinkageClass(class_tag)
    if objective not in ("Loss", "Risk"):
        raise ValueError(f"Oracle objective must be 'Loss' or 'Risk', got {objective!r}")
    grid = grid if grid is not None else fine_grid(inst, class_tag)
    etas = grid.eta_points if class_tag is ShrinkageClass.DATA_DRIVEN else None
    table_fn = risk_table if objective == "Risk" else loss_table
    table = np.asarray(table_fn(truth, inst, class_tag, grid.tau_points, etas))

    flat = int(np.argmin(table))
    if table.ndim == 2:
        i, j = np.unravel_index(flat, table.shape)
        eta = float(etas[j])
    else:
        i, eta = flat, 0.0
    hp = HyperParams(tau=float(grid.tau_points[i]), eta=eta, class_tag=class_tag)
    return SelectionResult(f"Oracle{objective}", hp, float(table.flat[flat]), grid_used=grid)


def inefficiency(truth: TruthInstance, inst: ProblemInstance, hp: HyperParams, grid: Grid | None = None) -> float:
    """Excess risk of ``hp`` over the risk oracle, as a percentage of the risk range.

    Raises:
        UndefinedMetricError: If the risk curve is flat on the grid.
    """
    grid = grid if grid is not None else fine_grid(inst, hp.class_tag)
    etas = grid.eta_points if hp.class_tag is ShrinkageClass.DATA_DRIVEN else None
    table = np.asarray(risk_table(truth, inst, hp.class_tag, grid.tau_points, etas))
    low, high = float(table.min()), float(table.max())
    if high - low < 1e-12:
        raise UndefinedMetricError("Risk is flat over the evaluation grid; inefficiency is undefined")
    return (total_risk(truth, inst, hp) - low) / (high - low) * 100.0
