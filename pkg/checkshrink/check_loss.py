"""Check-loss machinery: the G function, losses, risks and the shrinkage predictors."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import special

from checkshrink.stats_core import SQRT_2PI, DomainError, norm_quantile

# Beyond this |w| the G function is replaced by its linear asymptotes.
G_TAIL_SWITCH = 40.0


class InvalidInstanceError(ValueError):
    """Raised when problem data violate the model's constraints."""


class ShrinkageClass(str, Enum):
    """Where the shrinkage location comes from."""

    ORIGIN = "origin"
    GRAND_MEAN = "grandmean"
    DATA_DRIVEN = "datadriven"


def _vector(name: str, values, n: int | None = None) -> np.ndarray:
    array = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    if array.ndim != 1:
        raise InvalidInstanceError(f"{name} must be one-dimensional")
    if n is not None and array.size == 1 and n > 1:
        array = np.full(n, array[0])
    if n is not None and array.size != n:
        raise InvalidInstanceError(f"{name} has length {array.size}, expected {n}")
    if not np.all(np.isfinite(array)):
        raise InvalidInstanceError(f"{name} must contain only finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Observed past data with per-coordinate variances and cost weights.

    Scalars given for ``sigma_p``, ``sigma_f``, ``b`` or ``h`` are broadcast
    to every coordinate.
    """

    x: np.ndarray
    sigma_p: np.ndarray
    sigma_f: np.ndarray
    b: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        x = _vector("x", self.x)
        if x.size == 0:
            raise InvalidInstanceError("A problem instance needs at least one coordinate")
        object.__setattr__(self, "x", x)
        for name in ("sigma_p", "sigma_f", "b", "h"):
            values = _vector(name, getattr(self, name), x.size)
            if np.any(values <= 0.0):
                raise InvalidInstanceError(f"{name} must be strictly positive")
            object.__setattr__(self, name, values)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def b_tilde(self) -> np.ndarray:
        return self.b / (self.b + self.h)

    @property
    def cost_scale(self) -> np.ndarray:
        return self.b + self.h

    @property
    def x_bar(self) -> float:
        return float(np.mean(self.x))

    def with_x(self, x) -> ProblemInstance:
        return replace(self, x=x)

    def shifted(self, offset) -> ProblemInstance:
        """The same instance with ``offset`` subtracted from every observation."""
        return replace(self, x=self.x - offset)


@dataclass(frozen=True, eq=False)
class TruthInstance:
    """Unknown means, visible only to simulators and oracles."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _vector("theta", self.theta))

    def check(self, inst: ProblemInstance) -> None:
        if self.theta.size != inst.n:
            raise InvalidInstanceError(
                f"Truth has {self.theta.size} coordinates but the instance has {inst.n}"
            )


@dataclass(frozen=True)
class HyperParams:
    """Prior location and scale plus the shrinkage class they belong to."""

    tau: float
    eta: float = 0.0
    class_tag: ShrinkageClass = ShrinkageClass.ORIGIN

    def __post_init__(self):
        object.__setattr__(self, "class_tag", ShrinkageClass(self.class_tag))
        if math.isnan(self.tau) or self.tau < 0.0:
            raise InvalidInstanceError(f"tau must lie in [0, inf], got {self.tau}")
        if self.class_tag is ShrinkageClass.ORIGIN and self.eta != 0.0:
            raise InvalidInstanceError("The origin class shrinks towards 0; eta must be 0")


# G FUNCTION AND LOSSES

def g_fn(w, beta):
    """G(w, beta) = phi(w) + w Phi(w) - beta w, with linear tails for |w| > 40."""
    w = np.asarray(w, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0.0) or np.any(beta >= 1.0):
        raise DomainError(f"beta must lie strictly inside (0, 1), got {beta}")
    core = np.exp(-0.5 * w * w) / SQRT_2PI + w * special.ndtr(w) - beta * w
    value = np.where(w > G_TAIL_SWITCH, (1.0 - beta) * w, np.where(w < -G_TAIL_SWITCH, -beta * w, core))
    return float(value) if value.ndim == 0 else value


def expected_check_loss(theta, sigma_f, b, h, q):
    """E[b (Y - q)+ + h (q - Y)+] for Y ~ N(theta, sigma_f)."""
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    root = np.sqrt(np.asarray(sigma_f, dtype=float))
    value = (b + h) * root * g_fn((np.asarray(q) - np.asarray(theta)) / root, b / (b + h))
    return float(value) if np.ndim(value) == 0 else value


def realized_check_loss(y, q, b, h) -> float:
    """Average check loss of stocking ``q`` against realised demand ``y``."""
    y, q, b, h = (np.asarray(v, dtype=float) for v in (y, q, b, h))
    return float(np.mean(b * np.maximum(y - q, 0.0) + h * np.maximum(q - y, 0.0)))


# BAYES RULE AND PREDICTORS

def shrinkage_alpha(tau, sigma_p):
    """alpha = tau / (tau + sigma_p), exactly 1 at tau = inf."""
    tau = np.asarray(tau, dtype=float)
    sigma_p = np.asarray(sigma_p, dtype=float)
    finite_tau = np.where(np.isinf(tau), 0.0, tau)
    alpha = np.where(np.isinf(tau), 1.0, finite_tau / (finite_tau + sigma_p))
    return float(alpha) if alpha.ndim == 0 else alpha


def bayes_predict(x, eta, tau, sigma_p, sigma_f, b, h):
    """The b-tilde quantile of the posterior predictive N(alpha x + (1-alpha) eta, sigma_f + alpha sigma_p)."""
    alpha = np.asarray(shrinkage_alpha(tau, sigma_p))
    b = np.asarray(b, dtype=float)
    z = norm_quantile(b / (b + np.asarray(h, dtype=float)))
    value = alpha * x + (1.0 - alpha) * eta + np.sqrt(sigma_f + alpha * np.asarray(sigma_p)) * z
    return float(value) if np.ndim(value) == 0 else value


def class_location(inst: ProblemInstance, hp: HyperParams) -> float:
    if hp.class_tag is ShrinkageClass.GRAND_MEAN:
        return inst.x_bar
    if hp.class_tag is ShrinkageClass.DATA_DRIVEN:
        return float(hp.eta)
    return 0.0


def predict_class(inst: ProblemInstance, hp: HyperParams) -> np.ndarray:
    """Apply the Bayes rule coordinate-wise with the class's shrinkage location."""
    eta = class_location(inst, hp)
    return np.asarray(bayes_predict(inst.x, eta, hp.tau, inst.sigma_p, inst.sigma_f, inst.b, inst.h))


def cumulative_loss(truth: TruthInstance, inst: ProblemInstance, q) -> float:
    """Mean expected check loss of the predictions ``q`` at the true means."""
    truth.check(inst)
    q = np.asarray(q, dtype=float)
    if q.shape != (inst.n,):
        raise InvalidInstanceError(f"Prediction vector has shape {q.shape}, expected ({inst.n},)")
    return float(np.mean(expected_check_loss(truth.theta, inst.sigma_f, inst.b, inst.h, q)))


# RISK

def risk_params(tau, sigma_p, sigma_f, b_tilde):
    """Return ``(c, d, scale)`` of the risk representation.

    The risk of the origin rule at theta is
    ``(b + h) * scale * G(c + d * theta, b_tilde)`` with
    ``scale = sqrt(sigma_f + alpha^2 sigma_p)``.
    """
    alpha = np.asarray(shrinkage_alpha(tau, sigma_p))
    sigma_p = np.asarray(sigma_p, dtype=float)
    sigma_f = np.asarray(sigma_f, dtype=float)
    scale = np.sqrt(sigma_f + alpha**2 * sigma_p)
    c = np.sqrt((sigma_f + alpha * sigma_p) / (sigma_f + alpha**2 * sigma_p)) * norm_quantile(b_tilde)
    d = -(1.0 - alpha) / scale
    return c, d, scale


def coord_risk(theta, tau, sigma_p, sigma_f, b, h):
    """Closed-form frequentist risk of the origin rule for one coordinate (vectorised)."""
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    b_tilde = b / (b + h)
    c, d, scale = risk_params(tau, sigma_p, sigma_f, b_tilde)
    value = (b + h) * scale * g_fn(c + d * np.asarray(theta, dtype=float), b_tilde)
    return float(value) if np.ndim(value) == 0 else value


def _centred_theta(truth: TruthInstance, inst: ProblemInstance, class_tag: ShrinkageClass, eta: float):
    if class_tag is ShrinkageClass.GRAND_MEAN:
        return truth.theta - truth.theta.mean()
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        return truth.theta - eta
    return truth.theta


def total_risk(truth: TruthInstance, inst: ProblemInstance, hp: HyperParams) -> float:
    """Mean coordinate risk; the grand-mean class uses the theta-bar surrogate."""
    truth.check(inst)
    theta = _centred_theta(truth, inst, hp.class_tag, hp.eta)
    return float(np.mean(coord_risk(theta, hp.tau, inst.sigma_p, inst.sigma_f, inst.b, inst.h)))


def risk_table(truth: TruthInstance, inst: ProblemInstance, class_tag, taus, etas=None) -> np.ndarray:
    """Total risk on a grid: shape ``(len(taus),)``, or ``(len(taus), len(etas))`` for the data-driven class."""
    truth.check(inst)
    class_tag = ShrinkageClass(class_tag)
    taus = np.asarray(taus, dtype=float)
    b_tilde = inst.b_tilde
    c, d, scale = risk_params(taus[:, None], inst.sigma_p[None, :], inst.sigma_f[None, :], b_tilde[None, :])
    weight = inst.cost_scale[None, :] * scale
    if class_tag is not ShrinkageClass.DATA_DRIVEN or etas is None:
        theta = _centred_theta(truth, inst, class_tag, 0.0)
        return np.mean(weight * g_fn(c + d * theta[None, :], b_tilde[None, :]), axis=1)
    etas = np.asarray(etas, dtype=float)
    table = np.empty((taus.size, etas.size))
    for j, eta in enumerate(etas):
        theta = truth.theta - eta
        table[:, j] = np.mean(weight * g_fn(c + d * theta[None, :], b_tilde[None, :]), axis=1)
    return table
