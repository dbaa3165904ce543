"""Asymptotic risk estimation for check-loss shrinkage rules.

The estimator splits each observation into two conditionally independent
copies with auxiliary Gaussian noise. One copy selects how the risk term
is estimated (a linear branch far from the kink of G, an unbiased truncated
Hermite-Taylor series near it) and the other feeds the estimate. The
auxiliary noise is integrated out by Monte Carlo over a fixed set of draws
per coordinate, which every tau on a grid shares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from checkshrink.check_loss import HyperParams, ProblemInstance, ShrinkageClass, g_fn, risk_params
from checkshrink.competitors import SelectionResult
from checkshrink.grids import Grid, build_grid
from checkshrink.stats_core import (
    PHI_0,
    DomainError,
    RngSeed,
    compensated_sum,
    hermite_table,
    log_abs_hermite_at_zero,
)

DEFAULT_RHO = 0.5
DEFAULT_RB_REPS = 5
FALLBACK_GAMMA = 0.05
# Largest exponent a single series term may carry before it is capped.
_MAX_TERM_LOG = 600.0
# Share of middle-branch evaluations hitting the +-n cap that earns a warning.
_TRUNCATION_WARN_SHARE = 0.01


@dataclass(frozen=True, eq=False)
class AreTuning:
    """Per-coordinate threshold and truncation settings plus the Monte Carlo draws."""

    gamma: np.ndarray
    lambda_n: np.ndarray
    k_n: np.ndarray
    rb_reps: int
    rho: float
    seed: RngSeed
    n: int
    z: np.ndarray
    fallback_gamma: float = FALLBACK_GAMMA
    warnings: tuple = ()


@dataclass(frozen=True)
class SplitPair:
    u: float
    v: float


@dataclass(frozen=True)
class CoordinateParams:
    """The model parameters of one coordinate, with its index into the tuning."""

    index: int
    sigma_p: float
    sigma_f: float
    b: float
    h: float

    @classmethod
    def of(cls, inst: ProblemInstance, index: int) -> CoordinateParams:
        return cls(
            index,
            float(inst.sigma_p[index]),
            float(inst.sigma_f[index]),
            float(inst.b[index]),
            float(inst.h[index]),
        )

    @property
    def b_tilde(self) -> float:
        return self.b / (self.b + self.h)

    def shape(self, tau: float) -> tuple[float, float, float]:
        c, d, scale = risk_params(tau, self.sigma_p, self.sigma_f, self.b_tilde)
        return float(c), float(d), float(scale)


@dataclass(frozen=True)
class AreEvaluation:
    """An ARE value with the branch diagnostics of the evaluation."""

    value: float
    middle_fraction: float
    truncated_fraction: float
    capped_fraction: float = 0.0


# TUNING

def gamma_bound(sigma_p, sigma_f):
    """Upper bound on the threshold constant: 1/sqrt(2e) - sqrt(2 sigma_p / sigma_f)."""
    return 1.0 / math.sqrt(2.0 * math.e) - np.sqrt(2.0 * np.asarray(sigma_p) / np.asarray(sigma_f))


def make_tuning(
    inst: ProblemInstance,
    rho: float = DEFAULT_RHO,
    rb_reps: int = DEFAULT_RB_REPS,
    seed: RngSeed | None = None,
    fallback_gamma: float = FALLBACK_GAMMA,
) -> AreTuning:
    """Build thresholds, truncation orders and Monte Carlo draws for ``inst``.

    Args:
        inst: The problem instance.
        rho: Fraction of the threshold bound used for gamma, in (0, 1).
        rb_reps: Monte Carlo draws per coordinate for the Rao-Blackwell average.
        seed: Seed of the draws; coordinate i uses substream i.
        fallback_gamma: Gamma for coordinates whose bound is not positive.

    Returns:
        AreTuning, with a warning recorded when the fallback was needed.

    Raises:
        DomainError: On rho outside (0, 1), rb_reps < 1 or a non-positive fallback.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie strictly inside (0, 1), got {rho}")
    if int(rb_reps) < 1:
        raise DomainError(f"rb_reps must be at least 1, got {rb_reps}")
    if fallback_gamma <= 0.0:
        raise DomainError(f"fallback_gamma must be positive, got {fallback_gamma}")
    seed = seed if seed is not None else RngSeed(0)

    n = inst.n
    log_term = 2.0 * math.log(n)
    ratio_root = np.sqrt(2.0 * inst.sigma_p / inst.sigma_f)
    bound = gamma_bound(inst.sigma_p, inst.sigma_f)
    clamped = bound <= 0.0
    gamma = np.where(clamped, fallback_gamma, rho * bound)
    lambda_n = gamma * math.sqrt(log_term)
    k_n = 1 + np.ceil(math.e**2 * (gamma + ratio_root) ** 2 * log_term).astype(int)
    k_n = np.maximum(k_n, 2)

    warnings = []
    if np.any(clamped):
        warnings.append(
            f"{int(clamped.sum())} of {n} coordinates have sigma_p/sigma_f too large for the "
            f"threshold bound; gamma = {fallback_gamma} used there"
        )
    z = np.stack([seed.generator(i).standard_normal(int(rb_reps)) for i in range(n)])
    return AreTuning(
        gamma=gamma,
        lambda_n=lambda_n,
        k_n=k_n,
        rb_reps=int(rb_reps),
        rho=rho,
        seed=seed,
        n=n,
        z=z,
        fallback_gamma=fallback_gamma,
        warnings=tuple(warnings),
    )


# ESTIMATOR PIECES

def split_sample(x: float, sigma_p: float, z: float) -> SplitPair:
    root = math.sqrt(sigma_p)
    return SplitPair(x + root * z, x - root * z)


def truncate_estimate(s, n: float):
    """Clip the magnitude of ``s`` at ``n``, keeping its sign."""
    clipped = np.sign(s) * np.minimum(np.abs(s), n)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


def _taylor_series(u_tau: np.ndarray, var_u: np.ndarray, b_tilde: np.ndarray, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised series over flat arrays of equal length.

    Returns the sums and the mask of entries with a term capped at exp(_MAX_TERM_LOG).
    """
    k_max = int(np.max(k))
    root = np.sqrt(var_u)
    log_h, sign_h = hermite_table(k_max, u_tau / root)
    log_var = np.log(var_u)

    degrees = np.arange(2, k_max + 1, 2)
    coeff_log = math.log(PHI_0) + log_abs_hermite_at_zero(degrees - 2) - special.gammaln(degrees + 1.0)
    coeff_sign = np.where(((degrees - 2) // 2) % 2 == 1, -1.0, 1.0)

    terms = np.zeros((degrees.size + 2, u_tau.size))
    terms[0] = PHI_0
    terms[1] = (0.5 - b_tilde) * u_tau
    capped = np.zeros(u_tau.size, dtype=bool)
    for row, (m, c_log, c_sign) in enumerate(zip(degrees, coeff_log, coeff_sign), start=2):
        log_mag = c_log + 0.5 * m * log_var + log_h[m]
        value = c_sign * sign_h[m] * np.exp(np.minimum(log_mag, _MAX_TERM_LOG))
        active = m <= k
        capped |= active & (log_mag > _MAX_TERM_LOG)
        terms[row] = np.where(active, value, 0.0)
    return compensated_sum(terms, axis=0), capped


def taylor_estimate(u_tau, var_u, b_tilde, k):
    """Unbiased estimate of the order-K Taylor polynomial of G(., b_tilde).

    ``u_tau`` is a normal draw with variance ``var_u`` around the point at
    which G is wanted. Scalars and broadcastable arrays are accepted.

    Raises:
        DomainError: If ``var_u`` is not positive (the alpha = 1 edge has no
            series) or ``k`` < 2.
    """
    u_tau, var_u, b_tilde, k = np.broadcast_arrays(
        np.asarray(u_tau, dtype=float),
        np.asarray(var_u, dtype=float),
        np.asarray(b_tilde, dtype=float),
        np.asarray(k, dtype=int),
    )
    if np.any(var_u <= 0.0):
        raise DomainError("The series needs a positive variance; handle alpha = 1 separately")
    if np.any(k < 2):
        raise DomainError("The series needs a truncation order of at least 2")
    shape = u_tau.shape
    value, _ = _taylor_series(u_tau.ravel(), var_u.ravel(), b_tilde.ravel(), k.ravel())
    value = value.reshape(shape)
    return float(value) if value.ndim == 0 else value


def _threshold_values(u_tau, v_tau, var_u, b_tilde, lam, k, n):
    """Three-branch rule on broadcastable arrays.

    Returns the estimates, the middle-branch mask, the mask of middle
    entries whose series was clipped at +-n and the mask of middle entries
    with a capped series term.
    """
    u_tau, v_tau, var_u, b_tilde, lam, k = np.broadcast_arrays(u_tau, v_tau, var_u, b_tilde, lam, k)
    values = np.where(v_tau < -lam, -b_tilde * u_tau, (1.0 - b_tilde) * u_tau)
    middle = (v_tau >= -lam) & (v_tau <= lam)
    truncated = np.zeros(middle.shape, dtype=bool)
    capped = np.zeros(middle.shape, dtype=bool)
    if np.any(middle):
        series, capped[middle] = _taylor_series(u_tau[middle], var_u[middle], b_tilde[middle], k[middle])
        truncated[middle] = np.abs(series) > n
        values = values.copy()
        values[middle] = truncate_estimate(series, n)
    return values, middle, truncated, capped


def threshold_estimate(pair: SplitPair, tau: float, coord: CoordinateParams, tuning: AreTuning) -> float:
    """Estimate G(c + d theta, b_tilde) from one split pair."""
    c, d, _ = coord.shape(tau)
    if d == 0.0:
        return float(g_fn(c, coord.b_tilde))
    i = coord.index
    values, _, _, _ = _threshold_values(
        np.array([c + d * pair.u]),
        np.array([c + d * pair.v]),
        np.array([2.0 * coord.sigma_p * d * d]),
        np.array([coord.b_tilde]),
        np.array([tuning.lambda_n[i]]),
        np.array([tuning.k_n[i]]),
        tuning.n,
    )
    return float(values[0])


def rao_blackwell_t(x: float, tau: float, coord: CoordinateParams, tuning: AreTuning) -> float:
    """Average of the threshold estimate over the coordinate's Monte Carlo draws."""
    draws = tuning.z[coord.index]
    return float(np.mean([threshold_estimate(split_sample(x, coord.sigma_p, z), tau, coord, tuning) for z in draws]))


# ASSEMBLY

def evaluate_are(inst: ProblemInstance, tau: float, tuning: AreTuning, shift: float = 0.0) -> AreEvaluation:
    """ARE of the rule with scale ``tau`` shrinking towards ``shift``, with diagnostics."""
    if tuning.n != inst.n:
        raise DomainError(f"Tuning was built for {tuning.n} coordinates, the instance has {inst.n}")
    b_tilde = inst.b_tilde
    c, d, scale = risk_params(tau, inst.sigma_p, inst.sigma_f, b_tilde)
    weight = inst.cost_scale * scale
    if np.isinf(tau):
        return AreEvaluation(float(np.mean(weight * g_fn(c, b_tilde))), 0.0, 0.0)

    # tau so large that alpha rounds to 1: no series, the risk is theta-free.
    flat = d == 0.0
    x = inst.x - shift
    root = np.sqrt(inst.sigma_p)[:, None]
    u = x[:, None] + root * tuning.z
    v = x[:, None] - root * tuning.z
    var_u = np.where(flat, 1.0, 2.0 * inst.sigma_p * d * d)
    lam = np.where(flat, -1.0, tuning.lambda_n)
    values, middle, truncated, capped = _threshold_values(
        c[:, None] + d[:, None] * u,
        c[:, None] + d[:, None] * v,
        var_u[:, None],
        b_tilde[:, None],
        lam[:, None],
        tuning.k_n[:, None],
        tuning.n,
    )
    t_hat = np.where(flat, g_fn(c, b_tilde), values.mean(axis=1))
    middle_count = int(middle.sum())
    return AreEvaluation(
        value=float(np.mean(weight * t_hat)),
        middle_fraction=middle_count / middle.size,
        truncated_fraction=int(truncated.sum()) / middle_count if middle_count else 0.0,
        capped_fraction=int(capped.sum()) / middle_count if middle_count else 0.0,
    )


def are_origin(inst: ProblemInstance, tau: float, tuning: AreTuning) -> float:
    return evaluate_are(inst, tau, tuning).value


def are_datadriven(inst: ProblemInstance, eta: float, tau: float, tuning: AreTuning) -> float:
    """ARE of the rule shrinking towards ``eta``: the origin ARE of x - eta."""
    return evaluate_are(inst, tau, tuning, shift=eta).value


def are_grandmean(inst: ProblemInstance, tau: float, tuning: AreTuning) -> float:
    return evaluate_are(inst, tau, tuning, shift=inst.x_bar).value


# SELECTION

def are_curve(inst: ProblemInstance, class_tag, tuning: AreTuning, grid: Grid | None = None) -> list[dict]:
    """ARE over a grid as rows of ``tau``, ``eta`` and ``are_value``."""
    class_tag = ShrinkageClass(class_tag)
    grid = grid if grid is not None else build_grid(inst, class_tag)
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        etas = grid.eta_points
    elif class_tag is ShrinkageClass.GRAND_MEAN:
        etas = np.array([inst.x_bar])
    else:
        etas = np.array([0.0])

    rows = []
    for tau in grid.tau_points:
        for eta in etas:
            evaluation = evaluate_are(inst, float(tau), tuning, shift=float(eta))
            rows.append(
                {
                    "tau": float(tau),
                    "eta": float(eta),
                    "are_value": evaluation.value,
                    "middle_fraction": evaluation.middle_fraction,
                    "truncated_fraction": evaluation.truncated_fraction,
                    "capped_fraction": evaluation.capped_fraction,
                }
            )
    return rows


def select_are(inst: ProblemInstance, class_tag, tuning: AreTuning, grid: Grid | None = None) -> SelectionResult:
    """Minimise the class's ARE over its grid; ties go to smaller tau, then smaller eta."""
    class_tag = ShrinkageClass(class_tag)
    grid = grid if grid is not None else build_grid(inst, class_tag)
    rows = are_curve(inst, class_tag, tuning, grid)
    values = np.array([row["are_value"] for row in rows])
    best = rows[int(np.argmin(values))]

    warnings = list(tuning.warnings)
    truncated = max(row["truncated_fraction"] for row in rows)
    if truncated > _TRUNCATION_WARN_SHARE:
        warnings.append(f"series truncation at +-n bound in up to {truncated:.1%} of middle-branch evaluations")
    capped = max(row["capped_fraction"] for row in rows)
    if capped > 0.0:
        warnings.append(f"series terms capped at exp({_MAX_TERM_LOG:g}) in up to {capped:.1%} of middle-branch evaluations")
    eta = best["eta"] if class_tag is ShrinkageClass.DATA_DRIVEN else 0.0
    return SelectionResult(
        method="ARE",
        hp=HyperParams(tau=best["tau"], eta=eta, class_tag=class_tag),
        objective_value=best["are_value"],
        grid_used=grid,
        warnings=warnings,
    )
