"""Simulation harness: the benchmark scenarios, risk curves and the newsvendor study.

Every replication draws from its own substream ``seed.derive(rep)``, so a
scenario is a pure function of its spec and seed, whether the replications
run serially or on a thread pool.
"""
from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from checkshrink.are import DEFAULT_RB_REPS, DEFAULT_RHO, FALLBACK_GAMMA, make_tuning, select_are
from checkshrink.check_loss import (
    InvalidInstanceError,
    ProblemInstance,
    ShrinkageClass,
    TruthInstance,
    predict_class,
    realized_check_loss,
    risk_table,
)
from checkshrink.competitors import (
    SelectionResult,
    UndefinedMetricError,
    ebml_grandmean,
    ebml_select,
    ebmm_select,
    fine_grid,
    inefficiency,
    oracle_select,
    unshrunken,
)
from checkshrink.grids import build_grid, to_tau
from checkshrink.stats_core import DomainError, RngSeed, TooFewSamplesError, wilcoxon_signed_rank

METHODS = ("ARE", "ARE^G", "ARE^D", "EBML", "EBMM", "OracleRisk", "OracleLoss", "Unshrunken")
EXAMPLE3_CASES = ("I", "II", "III", "IV", "V", "VI")
DEFAULT_REPS = 50
SIGMA_P_CAP = 1.0 / 3.0
HIGH_VOLUME_THRESHOLD = 100.0

_ARE_CLASSES = {
    "ARE": ShrinkageClass.ORIGIN,
    "ARE^G": ShrinkageClass.GRAND_MEAN,
    "ARE^D": ShrinkageClass.DATA_DRIVEN,
}


@dataclass(frozen=True)
class ExperimentSettings:
    """Estimator tuning shared by all replications of a run."""

    rho: float = DEFAULT_RHO
    rb_reps: int = DEFAULT_RB_REPS
    fallback_gamma: float = FALLBACK_GAMMA
    min_points: int | None = None
    max_points: int | None = None
    threads: int = 0

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class ScenarioSpec:
    """A named simulation setup.

    ``name`` is one of Example1, Example2, Example3-CaseI .. Example3-CaseVI,
    Newsvendor or Custom. ``params`` carries ``sigma_ratio`` for Example2,
    the newsvendor cost settings, and ``theta``/``sigma_p``/``sigma_f``/``b``/``h``
    plus an optional ``shrinkage_class`` for Custom.
    """

    name: str
    n: int
    reps: int = DEFAULT_REPS
    seed: RngSeed = field(default_factory=lambda: RngSeed(0))
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError(f"reps must be at least 1, got {self.reps}")
        if self.n < 3:
            raise DomainError(f"Scenarios need at least 3 coordinates, got {self.n}")
        if self.name == "Example2" and not self.params.get("sigma_ratio", 0) > 0:
            raise DomainError("Example2 needs a positive sigma_ratio")
        if self.name.startswith("Example3"):
            self.case  # validates
        elif self.name not in ("Example1", "Example2", "Newsvendor", "Custom"):
            raise DomainError(f"Unknown scenario {self.name!r}")

    @property
    def case(self) -> str:
        case = self.name.partition("-Case")[2]
        if case not in EXAMPLE3_CASES:
            raise DomainError(f"Example3 scenarios are named Example3-CaseI .. Example3-CaseVI, got {self.name!r}")
        return case

    @property
    def default_class(self) -> ShrinkageClass:
        """The class of the EBML/EBMM, oracle and unshrunken rows."""
        if self.name.startswith("Example3") or self.name == "Newsvendor":
            return ShrinkageClass.GRAND_MEAN
        if self.name == "Custom":
            return ShrinkageClass(self.params.get("shrinkage_class", ShrinkageClass.ORIGIN))
        return ShrinkageClass.ORIGIN

    def to_dict(self) -> dict:
        params = {
            key: (np.asarray(value).tolist() if isinstance(value, np.ndarray) else value)
            for key, value in self.params.items()
        }
        return {
            "name": self.name,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed.seed,
            "stream_id": self.seed.stream_id,
            "params": params,
        }


@dataclass
class MethodRow:
    method: str
    class_tag: ShrinkageClass
    mean_inefficiency: float
    sd_inefficiency: float
    mean_tau: float
    sd_tau: float
    mean_eta: float | None = None
    mean_loss: float | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "class": self.class_tag.value,
            "mean_inefficiency": self.mean_inefficiency,
            "sd_inefficiency": self.sd_inefficiency,
            "mean_tau": self.mean_tau,
            "sd_tau": self.sd_tau,
            "mean_eta": self.mean_eta,
            "mean_loss": self.mean_loss,
        }


@dataclass
class Comparison:
    """Relative efficiency of ``challenger`` over ``baseline`` across replications."""

    baseline: str
    challenger: str
    mean_rel_efficiency: float
    summary: dict
    wilcoxon_p: float | None

    def to_dict(self) -> dict:
        return {
            "pair": [self.baseline, self.challenger],
            "mean_rel_efficiency": self.mean_rel_efficiency,
            "summary": self.summary,
            "wilcoxon_p": self.wilcoxon_p,
        }


@dataclass
class EvalReport:
    scenario: ScenarioSpec
    rows: list
    comparisons: list | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "rows": [row.to_dict() for row in self.rows],
            "comparisons": None if self.comparisons is None else [c.to_dict() for c in self.comparisons],
            "warnings": list(self.warnings),
        }

    def row(self, method: str) -> MethodRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)


# SCENARIO GENERATORS

def _draw_past(rng: np.random.Generator, theta: np.ndarray, sigma_p: np.ndarray) -> np.ndarray:
    return theta + np.sqrt(sigma_p) * rng.standard_normal(theta.size)


def gen_example1(n: int, seed: RngSeed) -> tuple[TruthInstance, ProblemInstance]:
    """Two fixed groups: 90% at theta = 1/sqrt(3) with b = 0.51, 10% at -3 sqrt(3) with b = 0.99.

    sigma_p = 1/3, sigma_f = 1 and b + h = 1; the means of the two groups
    cancel, so theta averages to 0 when n is a multiple of 10.
    """
    minor = max(1, round(n / 10))
    major = n - minor
    theta = np.concatenate((np.full(major, 1.0 / math.sqrt(3.0)), np.full(minor, -3.0 * math.sqrt(3.0))))
    b = np.concatenate((np.full(major, 0.51), np.full(minor, 0.99)))
    sigma_p = np.full(n, 1.0 / 3.0)
    x = _draw_past(seed.generator(), theta, sigma_p)
    return TruthInstance(theta), ProblemInstance(x, sigma_p, 1.0, b, 1.0 - b)


def gen_example2(sigma_ratio: float, n: int, seed: RngSeed) -> tuple[TruthInstance, ProblemInstance]:
    """theta ~ N(0, 1), b ~ U[0.51, 0.99], homoscedastic sigma_p = sigma_ratio, sigma_f = 1."""
    if sigma_ratio <= 0.0:
        raise DomainError(f"sigma_ratio must be positive, got {sigma_ratio}")
    rng = seed.generator()
    theta = rng.standard_normal(n)
    b = rng.uniform(0.51, 0.99, n)
    sigma_p = np.full(n, float(sigma_ratio))
    x = _draw_past(rng, theta, sigma_p)
    return TruthInstance(theta), ProblemInstance(x, sigma_p, 1.0, b, 1.0 - b)


def _inverse_chi2_capped(rng: np.random.Generator, n: int, dof: int = 10, cap: float = SIGMA_P_CAP) -> np.ndarray:
    """Inv-chi^2 draws, rejecting and redrawing those above ``cap``."""
    values = 1.0 / rng.chisquare(dof, n)
    rejected = values > cap
    while np.any(rejected):
        values[rejected] = 1.0 / rng.chisquare(dof, int(rejected.sum()))
        rejected = values > cap
    return values


def gen_example3(case: str, n: int, seed: RngSeed) -> tuple[TruthInstance, ProblemInstance]:
    """Heteroscedastic cases I-VI with b ~ U[0.51, 0.99] and sigma_f = 1.

    I and II draw theta from U(0, 1) and N(0, 1); III ties theta = 5 sigma_p;
    IV does the same with capped Inv-chi^2_10 variances; V splits the
    coordinates between sigma_p = 0.1 and 0.5 with theta ~ N(0, sigma_p); VI
    repeats III with uniform past observations of matching mean and variance.
    """
    if case not in EXAMPLE3_CASES:
        raise DomainError(f"Unknown Example3 case {case!r}; expected one of {', '.join(EXAMPLE3_CASES)}")
    rng = seed.generator()
    b = rng.uniform(0.51, 0.99, n)

    if case == "IV":
        sigma_p = _inverse_chi2_capped(rng, n)
    elif case == "V":
        sigma_p = np.where(rng.random(n) < 0.5, 0.1, 0.5)
    else:
        sigma_p = rng.uniform(0.1, SIGMA_P_CAP, n)

    if case == "I":
        theta = rng.uniform(0.0, 1.0, n)
    elif case == "II":
        theta = rng.standard_normal(n)
    elif case == "V":
        theta = np.sqrt(sigma_p) * rng.standard_normal(n)
    else:
        theta = 5.0 * sigma_p

    if case == "VI":
        half_width = np.sqrt(3.0 * sigma_p)
        x = rng.uniform(theta - half_width, theta + half_width)
    else:
        x = _draw_past(rng, theta, sigma_p)
    return TruthInstance(theta), ProblemInstance(x, sigma_p, 1.0, b, 1.0 - b)


def gen_custom(params: dict, n: int, seed: RngSeed) -> tuple[TruthInstance, ProblemInstance]:
    """Fresh past observations around user-supplied means."""
    theta = np.asarray(params["theta"], dtype=float)
    if theta.size != n:
        raise InvalidInstanceError(f"Custom scenario has {theta.size} means but n = {n}")
    template = ProblemInstance(theta, params["sigma_p"], params["sigma_f"], params["b"], params["h"])
    x = _draw_past(seed.generator(), theta, template.sigma_p)
    return TruthInstance(theta), template.with_x(x)


def generate(spec: ScenarioSpec, seed: RngSeed) -> tuple[TruthInstance, ProblemInstance]:
    if spec.name == "Example1":
        return gen_example1(spec.n, seed)
    if spec.name == "Example2":
        return gen_example2(float(spec.params["sigma_ratio"]), spec.n, seed)
    if spec.name.startswith("Example3"):
        return gen_example3(spec.case, spec.n, seed)
    if spec.name == "Custom":
        return gen_custom(spec.params, spec.n, seed)
    raise DomainError(f"Scenario {spec.name!r} has no instance generator; use newsvendor_run")


# SELECTION AND AGGREGATION

def method_class(method: str, default: ShrinkageClass) -> ShrinkageClass:
    if method not in METHODS:
        raise DomainError(f"Unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return _ARE_CLASSES.get(method, default)


def select(
    method: str,
    truth: TruthInstance,
    inst: ProblemInstance,
    class_tag: ShrinkageClass,
    settings: ExperimentSettings,
    seed: RngSeed,
    tuning_cache: dict,
) -> SelectionResult:
    """Run one selector; ARE variants share the tuning drawn from ``seed``."""
    if method in _ARE_CLASSES:
        if "tuning" not in tuning_cache:
            tuning_cache["tuning"] = make_tuning(
                inst,
                rho=settings.rho,
                rb_reps=settings.rb_reps,
                seed=seed,
                fallback_gamma=settings.fallback_gamma,
            )
        grid = build_grid(inst, class_tag, min_points=settings.min_points, max_points=settings.max_points)
        return select_are(inst, class_tag, tuning_cache["tuning"], grid)
    if method == "EBML":
        return ebml_select(inst, class_tag)
    if method == "EBMM":
        return ebmm_select(inst, class_tag)
    if method == "Unshrunken":
        return unshrunken(inst, class_tag)
    return oracle_select(truth, inst, class_tag, objective=method.removeprefix("Oracle"))


@dataclass
class _Outcome:
    inefficiency: float
    tau: float
    eta: float
    warnings: list
    loss: float | None = None


def _evaluate(
    methods,
    truth: TruthInstance,
    inst: ProblemInstance,
    default: ShrinkageClass,
    settings: ExperimentSettings,
    seed: RngSeed,
) -> dict:
    outcomes = {}
    grids = {}
    cache = {}
    for method in methods:
        class_tag = method_class(method, default)
        result = select(method, truth, inst, class_tag, settings, seed, cache)
        if class_tag not in grids:
            grids[class_tag] = fine_grid(inst, class_tag)
        warnings = list(result.warnings)
        try:
            value = inefficiency(truth, inst, result.hp, grids[class_tag])
        except UndefinedMetricError as e:
            value = float("nan")
            warnings.append(str(e))
        outcomes[method] = _Outcome(value, result.hp.tau, result.hp.eta, warnings)
    return outcomes


def _mean_sd(values) -> tuple[float, float]:
    """Mean and sample standard deviation, tolerating infinite taus."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if np.all(np.isinf(values)):
        return float("inf"), 0.0
    if not np.all(finite):
        return float("inf") if np.any(np.isinf(values)) else float("nan"), float("nan")
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), sd


def _aggregate(classes: dict, outcomes: list) -> tuple[list, list]:
    """One row per method; ``classes`` maps each method to the class it selected in."""
    rows = []
    messages = Counter()
    for method, class_tag in classes.items():
        per_rep = [outcome[method] for outcome in outcomes]
        mean_ineff, sd_ineff = _mean_sd([o.inefficiency for o in per_rep])
        mean_tau, sd_tau = _mean_sd([o.tau for o in per_rep])
        mean_eta = float(np.mean([o.eta for o in per_rep])) if class_tag is ShrinkageClass.DATA_DRIVEN else None
        losses = [o.loss for o in per_rep if o.loss is not None]
        mean_loss = float(np.mean(losses)) if losses else None
        rows.append(MethodRow(method, class_tag, mean_ineff, sd_ineff, mean_tau, sd_tau, mean_eta, mean_loss))
        for outcome in per_rep:
            messages.update(f"{method}: {w}" for w in dict.fromkeys(outcome.warnings))
    warnings = [f"{message} (in {count} of {len(outcomes)} replications)" for message, count in messages.items()]
    return rows, warnings


def _map_reps(worker, reps: int, settings: ExperimentSettings) -> list:
    if settings.workers == 1 or reps == 1:
        return [worker(rep) for rep in range(reps)]
    with ThreadPoolExecutor(max_workers=settings.workers) as executor:
        return list(executor.map(worker, range(reps)))


def run_scenario(spec: ScenarioSpec, methods, settings: ExperimentSettings | None = None) -> EvalReport:
    """Mean and sd of each method's inefficiency (and selected tau) over the replications.

    ARE, ARE^G and ARE^D select in their own classes; every other method
    works in the scenario's default class.
    """
    settings = settings or ExperimentSettings()
    methods = list(methods)
    if not methods:
        raise DomainError("At least one method is required")
    default = spec.default_class
    for method in methods:
        method_class(method, default)

    def replication(rep: int) -> dict:
        rep_seed = spec.seed.derive(rep)
        truth, inst = generate(spec, rep_seed.derive(0))
        return _evaluate(methods, truth, inst, default, settings, rep_seed.derive(1))

    outcomes = _map_reps(replication, spec.reps, settings)
    rows, warnings = _aggregate({method: method_class(method, default) for method in methods}, outcomes)
    return EvalReport(spec, rows, None, warnings)


def risk_curve(
    truth: TruthInstance,
    inst: ProblemInstance,
    class_tag=ShrinkageClass.ORIGIN,
    resolution: int = 200,
    eta: float = 0.0,
) -> list[dict]:
    """Closed-form total risk at ``resolution`` equispaced alpha values in [0, 1].

    alpha is tau/(tau + mean sigma_p), which is each coordinate's own shrinkage
    factor when the past variances are equal.
    """
    if resolution < 2:
        raise DomainError(f"A risk curve needs a resolution of at least 2, got {resolution}")
    class_tag = ShrinkageClass(class_tag)
    alphas = np.linspace(0.0, 1.0, int(resolution))
    taus = np.asarray(to_tau(alphas)) * float(np.mean(inst.sigma_p))
    if class_tag is ShrinkageClass.DATA_DRIVEN:
        risks = risk_table(truth, inst, class_tag, taus, [eta])[:, 0]
    else:
        risks = risk_table(truth, inst, class_tag, taus)
    return [
        {"alpha": float(a), "tau": float(t), "risk": float(r)}
        for a, t, r in zip(alphas, taus, risks)
    ]


def curve_argmin(rows: list[dict], key: str = "risk") -> dict:
    """The first row with the smallest ``key``."""
    return rows[int(np.argmin([row[key] for row in rows]))]


# NEWSVENDOR

@dataclass(frozen=True, eq=False)
class Catalogue:
    """Mean monthly demand and unit price per item."""

    theta: np.ndarray
    price: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        price = np.asarray(self.price, dtype=float)
        if theta.ndim != 1 or theta.shape != price.shape:
            raise InvalidInstanceError("theta and price must be one-dimensional and of equal length")
        if theta.size < 3:
            raise InvalidInstanceError(f"A catalogue needs at least 3 items, got {theta.size}")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(price))):
            raise InvalidInstanceError("theta and price must be finite")
        if np.any(price <= 0.0):
            raise InvalidInstanceError("Prices must be strictly positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "price", price)

    @property
    def size(self) -> int:
        return int(self.theta.size)

    @property
    def high_volume(self) -> np.ndarray:
        return self.theta > HIGH_VOLUME_THRESHOLD


def synthetic_catalogue(items: int = 200, seed: RngSeed | None = None, high_share: float = 0.25) -> Catalogue:
    """High-volume items with demand in U(100, 300), the rest in U(10, 30); prices in U(5, 40)."""
    if items < 3:
        raise DomainError(f"A catalogue needs at least 3 items, got {items}")
    if not 0.0 <= high_share <= 1.0:
        raise DomainError(f"high_share must lie in [0, 1], got {high_share}")
    rng = (seed or RngSeed(0)).generator()
    high = int(round(items * high_share))
    theta = np.concatenate((rng.uniform(100.0, 300.0, high), rng.uniform(10.0, 30.0, items - high)))
    price = rng.uniform(5.0, 40.0, items)
    return Catalogue(theta, price)


def newsvendor_costs(
    catalogue: Catalogue, markup: float = 0.15, capital_rate: float = 0.15, flat_cost: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Lost-sales cost m/(1+m) p (plus ``flat_cost`` for high-volume items) and monthly holding cost."""
    if markup <= 0.0 or capital_rate <= 0.0 or flat_cost < 0.0:
        raise DomainError("markup and capital_rate must be positive and flat_cost non-negative")
    b = markup / (1.0 + markup) * catalogue.price + np.where(catalogue.high_volume, flat_cost, 0.0)
    return b, b * capital_rate / 12.0


def relative_efficiency(loss_base, loss_new, loss_reference=None):
    """Percentage loss reduction of the new rule over the base rule.

    The reduction is measured in units of ``loss_reference`` (the base loss
    by default). With the unshrunken loss as reference, the efficiency of
    ARE over EBML is the difference of their efficiencies over US.
    """
    loss_base = np.asarray(loss_base, dtype=float)
    loss_new = np.asarray(loss_new, dtype=float)
    reference = loss_base if loss_reference is None else np.asarray(loss_reference, dtype=float)
    if np.any(reference == 0.0):
        raise UndefinedMetricError("Relative efficiency is undefined for a zero reference loss")
    value = (loss_base - loss_new) / reference * 100.0
    return float(value) if value.ndim == 0 else value


def compare_methods(losses_base, losses_new, baseline: str, challenger: str, losses_reference=None) -> Comparison:
    """Summary of per-replication relative efficiencies and a one-sided Wilcoxon p-value.

    ``losses_reference`` is passed through to :func:`relative_efficiency`.

    The test asks whether ``challenger`` has the smaller loss; zero
    differences are kept and split, so comparing a method with itself gives
    a p-value near 1/2.
    """
    efficiency = np.atleast_1d(relative_efficiency(losses_base, losses_new, losses_reference))
    summary = {
        "min": float(np.min(efficiency)),
        "q1": float(np.quantile(efficiency, 0.25)),
        "median": float(np.median(efficiency)),
        "mean": float(np.mean(efficiency)),
        "q3": float(np.quantile(efficiency, 0.75)),
        "max": float(np.max(efficiency)),
    }
    p_value = wilcoxon_signed_rank(efficiency, alternative="greater", zero_method="zsplit")
    return Comparison(baseline, challenger, summary["mean"], summary, p_value)


NEWSVENDOR_METHODS = ("US", "EBML", "ARE")
NEWSVENDOR_PAIRS = (("US", "ARE"), ("EBML", "ARE"), ("US", "EBML"))
# Every pair is measured against the unshrunken loss.
NEWSVENDOR_REFERENCE = "US"


def newsvendor_run(
    catalogue: Catalogue,
    demand_variance: float,
    markup: float = 0.15,
    capital_rate: float = 0.15,
    reps: int = DEFAULT_REPS,
    seed: RngSeed | None = None,
    flat_cost: float = 0.0,
    settings: ExperimentSettings | None = None,
) -> EvalReport:
    """Stock with the unshrunken, EBML and ARE^G rules and score them on fresh demand.

    Each replication draws two past months and next month's demand from
    N(theta, demand_variance); the rules see the average of the past months
    (variance ``demand_variance / 2``). All three work in the grand-mean class.
    """
    if demand_variance <= 0.0:
        raise DomainError(f"demand_variance must be positive, got {demand_variance}")
    settings = settings or ExperimentSettings()
    seed = seed or RngSeed(0)
    b, h = newsvendor_costs(catalogue, markup, capital_rate, flat_cost)
    spec = ScenarioSpec(
        "Newsvendor",
        catalogue.size,
        reps,
        seed,
        {"demand_variance": demand_variance, "markup": markup, "capital_rate": capital_rate, "flat_cost": flat_cost},
    )
    truth = TruthInstance(catalogue.theta)
    root = math.sqrt(demand_variance)
    grand_mean = ShrinkageClass.GRAND_MEAN

    def replication(rep: int) -> dict:
        rep_seed = seed.derive(rep)
        rng = rep_seed.derive(0).generator()
        past = catalogue.theta + root * rng.standard_normal((2, catalogue.size))
        demand = catalogue.theta + root * rng.standard_normal(catalogue.size)
        inst = ProblemInstance(past.mean(axis=0), demand_variance / 2.0, demand_variance, b, h)

        tuning = make_tuning(inst, settings.rho, settings.rb_reps, rep_seed.derive(1), settings.fallback_gamma)
        grid = build_grid(inst, grand_mean, min_points=settings.min_points, max_points=settings.max_points)
        selections = {
            "US": unshrunken(inst, grand_mean),
            "EBML": ebml_grandmean(inst),
            "ARE": select_are(inst, grand_mean, tuning, grid),
        }
        evaluation = fine_grid(inst, grand_mean)
        outcomes = {}
        for method, result in selections.items():
            warnings = list(result.warnings)
            try:
                value = inefficiency(truth, inst, result.hp, evaluation)
            except UndefinedMetricError as e:
                value = float("nan")
                warnings.append(str(e))
            loss = realized_check_loss(demand, predict_class(inst, result.hp), b, h)
            outcomes[method] = _Outcome(value, result.hp.tau, result.hp.eta, warnings, loss)
        return outcomes

    outcomes = _map_reps(replication, reps, settings)
    rows, warnings = _aggregate(dict.fromkeys(NEWSVENDOR_METHODS, grand_mean), outcomes)
    comparisons = []
    reference = [o[NEWSVENDOR_REFERENCE].loss for o in outcomes]
    for baseline, challenger in NEWSVENDOR_PAIRS:
        base = [o[baseline].loss for o in outcomes]
        new = [o[challenger].loss for o in outcomes]
        try:
            comparisons.append(compare_methods(base, new, baseline, challenger, reference))
        except TooFewSamplesError as e:
            efficiency = np.atleast_1d(relative_efficiency(base, new, reference))
            comparisons.append(Comparison(baseline, challenger, float(np.mean(efficiency)), {}, None))
            warnings.append(f"{challenger} over {baseline}: {e}")
    return EvalReport(spec, rows, comparisons, warnings)
