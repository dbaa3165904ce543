"""Hyperparameter grids for the ARE minimisation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from checkshrink.check_loss import ProblemInstance, ShrinkageClass
from checkshrink.stats_core import PHI_0, norm_quantile, sample_quantile


class GridError(ValueError):
    """Raised when a grid cannot be built for the requested dimension."""


class GridConstants(NamedTuple):
    c1: float
    c2: float
    c3: float
    c4: float


@dataclass(frozen=True, eq=False)
class Grid:
    """A discretised search set over tau (and eta for the data-driven class).

    ``tau_points`` come from equispaced points of tau/(tau+1) in [0, 1]; the
    point 1 maps to tau = inf.
    """

    tau_points: np.ndarray
    delta: float
    a_n: float
    constants: GridConstants | None
    eta_points: np.ndarray | None = None
    class_tag: ShrinkageClass = ShrinkageClass.ORIGIN

    @property
    def size(self) -> int:
        if self.eta_points is None:
            return int(self.tau_points.size)
        return int(self.tau_points.size * self.eta_points.size)


def log_log(n: float) -> float:
    """a_n = ln ln n, defined for n >= 3."""
    if n < 3:
        raise GridError(f"Grids need a dimension of at least 3, got {n}")
    return math.log(math.log(n))


def to_tau(tau_tilde):
    """Map tau/(tau+1) back to tau, sending 1 to inf."""
    tau_tilde = np.asarray(tau_tilde, dtype=float)
    at_one = tau_tilde >= 1.0
    tau = np.where(at_one, np.inf, tau_tilde / np.where(at_one, 1.0, 1.0 - tau_tilde))
    return float(tau) if tau.ndim == 0 else tau


def to_tau_tilde(tau):
    tau = np.asarray(tau, dtype=float)
    tilde = np.where(np.isinf(tau), 1.0, tau / (np.where(np.isinf(tau), 0.0, tau) + 1.0))
    return float(tilde) if tilde.ndim == 0 else tilde


def grid_constants(inst: ProblemInstance, n: float | None = None) -> GridConstants:
    """The plug-in constants C1..C4 behind the grid spacing."""
    a_n = log_log(inst.n if n is None else n)
    c1 = float(np.max(inst.cost_scale))
    c2 = float(max(np.max(inst.sigma_p), np.max(1.0 / inst.sigma_p)))
    c3 = float(np.max(inst.sigma_p / inst.sigma_f) * np.max(np.abs(norm_quantile(inst.b_tilde))))
    c4 = float(max(1.0, np.mean(np.abs(inst.x)) / math.sqrt(a_n)))
    return GridConstants(c1, c2, c3, c4)


def _spacing(constants: GridConstants, a_n: float, extra: float = 0.0) -> float:
    c1, c2, c3, c4 = constants
    return 1.0 / (2.0 * c1 * c2 * (2.0 * PHI_0 + c3 + math.sqrt(a_n) * c4 + a_n + extra))


def tau_tilde_points(
    delta: float, min_points: int | None = None, max_points: int | None = None
) -> tuple[np.ndarray, float]:
    """Equispaced points in [0, 1] always containing both endpoints.

    Returns the points and the spacing actually used: refined when
    ``min_points`` asks for more points than ``delta`` gives, coarsened when
    ``max_points`` allows fewer.
    """
    m = math.ceil(1.0 / delta)
    interior = np.arange(1, m) * delta
    interior = interior[interior < 1.0 - 1e-12]
    points = np.concatenate(([0.0], interior, [1.0]))
    if min_points is not None and points.size < min_points:
        points = np.linspace(0.0, 1.0, int(min_points))
        delta = 1.0 / (int(min_points) - 1)
    if max_points is not None and points.size > max_points:
        if max_points < 2:
            raise GridError(f"A grid needs at least its two endpoints, got max_points={max_points}")
        points = np.linspace(0.0, 1.0, int(max_points))
        delta = 1.0 / (int(max_points) - 1)
    return points, delta


def build_grid_origin(
    inst: ProblemInstance,
    n: float | None = None,
    min_points: int | None = None,
    max_points: int | None = None,
) -> Grid:
    """The tau grid for the origin (and grand-mean) classes."""
    n = inst.n if n is None else n
    a_n = log_log(n)
    constants = grid_constants(inst, n)
    tilde, delta = tau_tilde_points(_spacing(constants, a_n), min_points, max_points)
    return Grid(tau_points=to_tau(tilde), delta=delta, a_n=a_n, constants=constants)


def build_grid_grandmean(
    inst: ProblemInstance,
    n: float | None = None,
    min_points: int | None = None,
    max_points: int | None = None,
) -> Grid:
    centred = inst.shifted(inst.x_bar)
    grid = build_grid_origin(centred, n, min_points, max_points)
    return Grid(grid.tau_points, grid.delta, grid.a_n, grid.constants, None, ShrinkageClass.GRAND_MEAN)


def m_hat_interval(inst: ProblemInstance) -> tuple[float, float]:
    """Sample quantiles of x at the smallest and largest critical ratios."""
    b_tilde = inst.b_tilde
    lo = sample_quantile(inst.x, float(np.min(b_tilde)))
    hi = sample_quantile(inst.x, float(np.max(b_tilde)))
    return lo, hi


def build_grid_datadriven(
    inst: ProblemInstance,
    n: float | None = None,
    min_points: int | None = None,
    max_points: int | None = None,
) -> Grid:
    """Product grid over (eta, tau) for the data-driven class.

    The eta axis is equispaced on [-a_n, a_n] and restricted to the clipping
    interval; when nothing survives the restriction the interval endpoints
    are used instead.
    """
    n = inst.n if n is None else n
    a_n = log_log(n)
    constants = grid_constants(inst, n)
    tilde, delta = tau_tilde_points(_spacing(constants, a_n, extra=a_n**2), min_points, max_points)

    eta_spacing = 1.0 / (2.0 * constants.c1 * a_n)
    count = int(math.floor(2.0 * a_n / eta_spacing + 1e-9)) + 1
    etas = -a_n + eta_spacing * np.arange(count)
    lo, hi = m_hat_interval(inst)
    etas = etas[(etas >= lo - 1e-12) & (etas <= hi + 1e-12)]
    if etas.size == 0:
        etas = np.unique(np.array([lo, hi]))
    return Grid(
        tau_points=to_tau(tilde),
        delta=delta,
        a_n=a_n,
        constants=constants,
        eta_points=etas,
        class_tag=ShrinkageClass.DATA_DRIVEN,
    )


def build_grid(
    inst: ProblemInstance,
    class_tag,
    n: float | None = None,
    min_points: int | None = None,
    max_points: int | None = None,
) -> Grid:
    class_tag = ShrinkageClass(class_tag)
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        return build_grid_datadriven(inst, n, min_points, max_points)
    if class_tag is ShrinkageClass.GRAND_MEAN:
        return build_grid_grandmean(inst, n, min_points, max_points)
    return build_grid_origin(inst, n, min_points, max_points)
