"""Numerical building blocks for checkshrink.

Normal distribution functions, probabilists' Hermite polynomials in
sign/log-magnitude form, compensated summation, sample quantiles, the
seeded RNG contract and the Wilcoxon signed-rank test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

SQRT_2PI = math.sqrt(2.0 * math.pi)
PHI_0 = 1.0 / SQRT_2PI

# Rescale the Hermite recurrence once magnitudes pass this bound.
_RESCALE_AT = 1e150
_MAX_SEED = 2**64
_EXACT_WILCOXON_MAX_N = 25
_MIN_WILCOXON_N = 5


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


class EmptyInputError(ValueError):
    """Raised when a statistic is requested for an empty sample."""


class TooFewSamplesError(ValueError):
    """Raised when a test has too few usable observations."""


def _scalar_or_array(values, template):
    if np.ndim(template) == 0:
        return float(values)
    return values


# NORMAL DISTRIBUTION

def norm_pdf(x):
    """Standard normal density, for scalars or arrays."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(np.exp(-0.5 * x * x) / SQRT_2PI, x)


def norm_cdf(x):
    """Standard normal distribution function, for scalars or arrays."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(special.ndtr(x), x)


def norm_quantile(p):
    """Standard normal quantile function.

    Args:
        p: Probability (scalar or array) strictly inside (0, 1).

    Returns:
        The quantile, refined by one Newton step on ``norm_cdf``.

    Raises:
        DomainError: If any probability lies outside (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError(f"Quantile level must lie strictly inside (0, 1), got {p}")
    x = special.ndtri(p)
    x = x - (special.ndtr(x) - p) / (np.exp(-0.5 * x * x) / SQRT_2PI)
    return _scalar_or_array(x, p)


# HERMITE POLYNOMIALS

@dataclass(frozen=True)
class HermiteEval:
    """A probabilists' Hermite value H_k(x) in sign/log-magnitude form."""

    degree: int
    value: float
    log_magnitude: float
    sign: int


def _from_log(sign: int, log_magnitude: float) -> float:
    if sign == 0:
        return 0.0
    if log_magnitude > 709.0:
        return math.copysign(math.inf, sign)
    return sign * math.exp(log_magnitude)


def hermite_eval(k: int, x: float) -> HermiteEval:
    """Evaluate H_k(x) with the three-term recurrence.

    The pair (H_{j-1}, H_j) is rescaled whenever it grows past 1e150 and the
    removed scale is carried in log form, so degrees up to 10000 never
    overflow.

    Args:
        k: Non-negative degree, at most 10000.
        x: Evaluation point.

    Returns:
        HermiteEval with the exact value when representable.
    """
    if k < 0 or k > 10000:
        raise DomainError(f"Hermite degree must be in [0, 10000], got {k}")
    x = float(x)
    prev, cur, log_scale = 1.0, x, 0.0
    if k == 0:
        cur = 1.0
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
        size = max(abs(cur), abs(prev))
        if size > _RESCALE_AT:
            prev, cur = prev / size, cur / size
            log_scale += math.log(size)
    if cur == 0.0:
        return HermiteEval(k, 0.0, -math.inf, 0)
    sign = 1 if cur > 0 else -1
    log_magnitude = math.log(abs(cur)) + log_scale
    value = cur if log_scale == 0.0 else _from_log(sign, log_magnitude)
    return HermiteEval(k, value, log_magnitude, sign)


def hermite_table(k_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate H_0 .. H_{k_max} at every point of ``x``.

    Returns:
        ``(log_magnitude, sign)``, each of shape ``(k_max + 1,) + x.shape``.
        Zero values have log magnitude ``-inf`` and sign 0.
    """
    x = np.asarray(x, dtype=float)
    log_mag = np.empty((k_max + 1,) + x.shape)
    sign = np.empty((k_max + 1,) + x.shape)
    log_mag[0] = 0.0
    sign[0] = 1.0
    if k_max == 0:
        return log_mag, sign

    prev = np.ones_like(x)
    cur = x.copy()
    log_scale = np.zeros_like(x)
    with np.errstate(divide="ignore"):
        log_mag[1] = np.log(np.abs(cur))
        sign[1] = np.sign(cur)
        for j in range(1, k_max):
            prev, cur = cur, x * cur - j * prev
            size = np.maximum(np.abs(cur), np.abs(prev))
            big = size > _RESCALE_AT
            if np.any(big):
                factor = np.where(big, size, 1.0)
                prev = prev / factor
                cur = cur / factor
                log_scale = log_scale + np.log(factor)
            log_mag[j + 1] = np.log(np.abs(cur)) + log_scale
            sign[j + 1] = np.sign(cur)
    return log_mag, sign


def hermite_at_zero(k: int) -> HermiteEval:
    """H_k(0): zero for odd k, (-1)^(k/2) (k-1)!! for even k."""
    if k < 0:
        raise DomainError(f"Hermite degree must be non-negative, got {k}")
    if k % 2 == 1:
        return HermiteEval(k, 0.0, -math.inf, 0)
    sign = -1 if (k // 2) % 2 else 1
    if k <= 300:
        magnitude = math.prod(range(k - 1, 0, -2))
        return HermiteEval(k, float(sign * magnitude), math.log(magnitude), sign)
    log_magnitude = float(
        special.gammaln(k + 1) - (k / 2) * math.log(2.0) - special.gammaln(k / 2 + 1)
    )
    return HermiteEval(k, _from_log(sign, log_magnitude), log_magnitude, sign)


def log_abs_hermite_at_zero(degrees: np.ndarray) -> np.ndarray:
    """Vectorised log|H_k(0)| for even degrees."""
    degrees = np.asarray(degrees, dtype=float)
    return special.gammaln(degrees + 1) - (degrees / 2) * math.log(2.0) - special.gammaln(degrees / 2 + 1)


# SUMMATION AND QUANTILES

def compensated_sum(terms, axis: int = 0) -> np.ndarray:
    """Neumaier-compensated sum along ``axis``, largest magnitudes first."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    order = np.argsort(-np.abs(terms), axis=0, kind="stable")
    terms = np.take_along_axis(terms, order, axis=0)
    total = np.zeros(terms.shape[1:])
    carry = np.zeros(terms.shape[1:])
    for term in terms:
        t = total + term
        carry += np.where(np.abs(total) >= np.abs(term), (total - t) + term, (term - t) + total)
        total = t
    return total + carry


def sample_quantile(xs, alpha: float) -> float:
    """Type-7 (linear interpolation) sample quantile.

    Raises:
        EmptyInputError: If ``xs`` is empty.
        DomainError: If ``alpha`` is outside [0, 1].
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise EmptyInputError("Cannot take a quantile of an empty sample")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"Quantile level must lie in [0, 1], got {alpha}")
    return float(np.quantile(xs, alpha))


# RANDOM STREAMS

@dataclass(frozen=True)
class RngSeed:
    """Splittable seed: equal (seed, stream_id) pairs give identical streams."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < _MAX_SEED:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def sequence(self, *keys: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *map(int, keys)))

    def generator(self, *keys: int) -> np.random.Generator:
        """A PCG64 generator for this stream, optionally narrowed by ``keys``."""
        return np.random.Generator(np.random.PCG64(self.sequence(*keys)))

    def derive(self, key: int) -> RngSeed:
        """An independent child seed for substream ``key``."""
        child = int(self.sequence(key).generate_state(1, dtype=np.uint64)[0])
        return RngSeed(self.seed, child)


# WILCOXON SIGNED-RANK TEST

def _rank_sum_pmf(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null pmf of the sum of a random subset of the given integer ranks."""
    counts = np.zeros(int(doubled_ranks.sum()) + 1)
    counts[0] = 1.0
    for rank in doubled_ranks.astype(int):
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[: counts.size - rank]
        counts = counts + shifted
    return counts / counts.sum()


def wilcoxon_signed_rank(diffs, alternative: str = "greater", zero_method: str = "wilcox") -> float:
    """One-sample Wilcoxon signed-rank test on paired differences.

    Args:
        diffs: Paired differences.
        alternative: ``"greater"`` (differences shifted above zero) or ``"less"``.
        zero_method: ``"wilcox"`` drops zero differences; ``"zsplit"`` keeps
            them in the ranking and credits half of their rank to each side.

    Returns:
        The one-sided p-value: exact for at most 25 non-zero differences,
        normal approximation with tie and continuity corrections otherwise
        (always when zero differences are kept).

    Raises:
        TooFewSamplesError: With fewer than 5 usable differences.
    """
    if alternative not in ("greater", "less"):
        raise DomainError(f"Alternative must be 'greater' or 'less', got {alternative!r}")
    if zero_method not in ("wilcox", "zsplit"):
        raise DomainError(f"zero_method must be 'wilcox' or 'zsplit', got {zero_method!r}")

    d = np.asarray(diffs, dtype=float).ravel()
    if zero_method == "wilcox":
        d = d[d != 0.0]
    n = d.size
    if n < _MIN_WILCOXON_N:
        raise TooFewSamplesError(f"Wilcoxon test needs at least {_MIN_WILCOXON_N} differences, got {n}")

    ranks = stats.rankdata(np.abs(d))
    positive = d > 0
    zero = d == 0
    if alternative == "less":
        positive = d < 0
    t_plus = ranks[positive].sum() + 0.5 * ranks[zero].sum()

    if n <= _EXACT_WILCOXON_MAX_N and not np.any(zero):
        # Average ranks are multiples of 1/2, so doubling makes them integral.
        pmf = _rank_sum_pmf(np.rint(2.0 * ranks))
        observed = int(np.rint(2.0 * t_plus))
        return float(min(1.0, pmf[observed:].sum()))

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts**3 - tie_counts).sum() / 48.0
    if variance <= 0.0:
        return 0.5
    z = (t_plus - mean - 0.5) / math.sqrt(variance)
    return float(special.ndtr(-z))
