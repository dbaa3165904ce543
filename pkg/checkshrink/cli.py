"""Command line interface for checkshrink."""
import sys
from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np

from checkshrink.are import are_curve, make_tuning, select_are
from checkshrink.check_loss import ProblemInstance, ShrinkageClass, TruthInstance, predict_class
from checkshrink.competitors import ebml_select, ebmm_select, inefficiency, unshrunken
from checkshrink.config import CliConfig
from checkshrink.experiments import (
    ExperimentSettings,
    ScenarioSpec,
    newsvendor_run,
    risk_curve,
    run_scenario,
    synthetic_catalogue,
)
from checkshrink.grids import build_grid
from checkshrink.report_operations import ReportOperations
from checkshrink.stats_core import RngSeed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# Errors that mean the input data (not the command line) is at fault.
DATA_ERRORS = (ValueError, OSError)

REPORT_COLUMNS = ("method", "class", "mean_inefficiency", "sd_inefficiency", "mean_tau", "sd_tau", "mean_eta", "mean_loss")

DEFAULT_METHODS = {
    "example1": ["ARE", "EBML", "EBMM", "OracleRisk", "OracleLoss"],
    "example2": ["ARE", "EBML", "EBMM", "OracleRisk", "OracleLoss"],
    "example3": ["ARE^G", "EBML", "EBMM", "OracleRisk", "OracleLoss"],
}
ARE_METHOD_BY_CLASS = {"origin": "ARE", "grandmean": "ARE^G", "datadriven": "ARE^D"}


def _say(context, message):
    """Progress line on stderr, shown in verbose mode only."""
    if context["config"].verbose:
        print(message, file=sys.stderr)


def _settings(config) -> ExperimentSettings:
    return ExperimentSettings(
        rho=config.rho,
        rb_reps=config.rb_reps,
        fallback_gamma=config.fallback_gamma,
        min_points=config.grid_size_override,
        max_points=config.grid_max_points,
        threads=config.threads,
    )


def _tuning(config, inst):
    return make_tuning(inst, config.rho, config.rb_reps, RngSeed(config.seed), config.fallback_gamma)


def _grid(config, inst, class_tag):
    return build_grid(inst, class_tag, min_points=config.grid_size_override, max_points=config.grid_max_points)


class Step(ABC):
    """Abstract base class for pipeline steps."""

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @abstractmethod
    def execute(self, context: Dict[str, Any]) -> bool:
        """Execute the step. Returns True if successful."""
        pass


class LoadInstanceStep(Step):
    @property
    def name(self) -> str:
        return "Loading problem instance"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        inst, truth = context["report_ops"].read_instance(config.input_path)
        context["inst"] = inst
        context["truth"] = truth
        _say(context, f"✅ Loaded {inst.n} coordinates from {config.input_path}")
        return True


class SelectionStep(Step):
    @property
    def name(self) -> str:
        return "Selecting hyperparameters"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        inst = context["inst"]
        class_tag = ShrinkageClass(config.shrinkage_class)
        if config.method == "are":
            result = select_are(inst, class_tag, _tuning(config, inst), _grid(config, inst, class_tag))
        elif config.method == "ebml":
            result = ebml_select(inst, class_tag)
        elif config.method == "ebmm":
            result = ebmm_select(inst, class_tag)
        else:
            result = unshrunken(inst, class_tag)
        context["selection"] = result
        context["warnings"].extend(result.warnings)
        _say(context, f"✅ {result.method}: tau = {result.hp.tau:.6g}, eta = {result.hp.eta:.6g}")
        return True


class PredictionStep(Step):
    @property
    def name(self) -> str:
        return "Computing predictions"

    def execute(self, context: Dict[str, Any]) -> bool:
        inst = context["inst"]
        result = context["selection"]
        q = predict_class(inst, result.hp)
        payload = {
            "method": result.method,
            "class": result.hp.class_tag.value,
            "tau": result.hp.tau,
            "eta": result.hp.eta,
            "objective_value": result.objective_value,
            "grid_size": result.grid_used.size if result.grid_used is not None else None,
            "predictions": q,
            "warnings": context["warnings"],
        }
        if context.get("truth") is not None:
            payload["inefficiency"] = inefficiency(context["truth"], inst, result.hp)
            _say(context, f"ℹ️  Inefficiency against the risk oracle: {payload['inefficiency']:.2f}%")
        context["payload"] = payload
        context["rows"] = [{"index": i, "x": x, "q": value} for i, (x, value) in enumerate(zip(inst.x, q))]
        context["columns"] = ("index", "x", "q")
        return True


class AreCurveStep(Step):
    @property
    def name(self) -> str:
        return "Evaluating the risk estimate over the grid"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        inst = context["inst"]
        class_tag = ShrinkageClass(config.shrinkage_class)
        tuning = _tuning(config, inst)
        context["warnings"].extend(tuning.warnings)
        rows = are_curve(inst, class_tag, tuning, _grid(config, inst, class_tag))
        context["payload"] = {"class": class_tag.value, "curve": rows, "warnings": context["warnings"]}
        context["rows"] = rows
        if class_tag is ShrinkageClass.DATA_DRIVEN:
            context["columns"] = ("tau", "eta", "are_value")
        else:
            context["columns"] = ("tau", "are_value")
        _say(context, f"✅ Evaluated {len(rows)} grid points")
        return True


class RiskCurveStep(Step):
    @property
    def name(self) -> str:
        return "Computing risk curve"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        if config.input_path:
            inst, truth = context["report_ops"].read_instance(config.input_path, require_theta=True)
        else:
            h = config.h if config.h is not None else 1.0 - config.b
            # The risk does not depend on x, so theta stands in for it.
            inst = ProblemInstance(np.array([config.theta]), config.sigma_p, config.sigma_f, config.b, h)
            truth = TruthInstance(np.array([config.theta]))
        rows = risk_curve(truth, inst, config.shrinkage_class, config.resolution, config.eta)
        best = rows[int(np.argmin([row["risk"] for row in rows]))]
        _say(context, f"ℹ️  Smallest risk {best['risk']:.6g} at alpha = {best['alpha']:.4f}")
        context["payload"] = {"class": config.shrinkage_class, "curve": rows}
        context["rows"] = rows
        context["columns"] = ("alpha", "risk")
        return True


class ScenarioStep(Step):
    @property
    def name(self) -> str:
        return "Running scenario"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        params = {}
        n = config.n
        if config.scenario == "example1":
            name = "Example1"
        elif config.scenario == "example2":
            name = "Example2"
            params["sigma_ratio"] = config.sigma_ratio
        elif config.scenario == "example3":
            name = f"Example3-Case{config.case}"
        else:
            name = "Custom"
            inst, truth = context["report_ops"].read_instance(config.input_path, require_theta=True)
            n = inst.n
            params = {
                "theta": truth.theta,
                "sigma_p": inst.sigma_p,
                "sigma_f": inst.sigma_f,
                "b": inst.b,
                "h": inst.h,
                "shrinkage_class": config.shrinkage_class,
            }
        methods = config.methods or DEFAULT_METHODS.get(
            config.scenario, [ARE_METHOD_BY_CLASS[config.shrinkage_class], "EBML", "EBMM", "OracleRisk", "OracleLoss"]
        )
        spec = ScenarioSpec(name, n, config.reps, RngSeed(config.seed), params)
        _say(context, f"ℹ️  {name}: n = {n}, {config.reps} replications, methods {', '.join(methods)}")
        report = run_scenario(spec, methods, _settings(config))
        context["warnings"].extend(report.warnings)
        context["payload"] = report.to_dict()
        context["rows"] = [row.to_dict() for row in report.rows]
        context["columns"] = REPORT_COLUMNS
        for row in report.rows:
            _say(context, f"✅ {row.method}: inefficiency {row.mean_inefficiency:.2f}% ({row.sd_inefficiency:.2f})")
        return True


class NewsvendorStep(Step):
    @property
    def name(self) -> str:
        return "Running newsvendor study"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        if config.input_path:
            catalogue = context["report_ops"].read_catalogue(config.input_path)
        else:
            catalogue = synthetic_catalogue(config.items, RngSeed(config.seed, 1))
        report = newsvendor_run(
            catalogue,
            config.demand_variance,
            markup=config.markup,
            capital_rate=config.capital_rate,
            reps=config.reps,
            seed=RngSeed(config.seed),
            flat_cost=config.flat_cost,
            settings=_settings(config),
        )
        context["warnings"].extend(report.warnings)
        context["payload"] = report.to_dict()
        context["rows"] = [row.to_dict() for row in report.rows]
        context["columns"] = REPORT_COLUMNS
        for comparison in report.comparisons:
            _say(context, f"✅ {comparison.challenger} over {comparison.baseline}: "
                          f"{comparison.mean_rel_efficiency:.2f}% (p = {comparison.wilcoxon_p})")
        return True


class WriteReportStep(Step):
    @property
    def name(self) -> str:
        return "Writing report"

    def execute(self, context: Dict[str, Any]) -> bool:
        config = context["config"]
        report_ops = context["report_ops"]
        if config.output_format == "csv":
            report_ops.write_csv(context["rows"], context["columns"])
        else:
            report_ops.write_json(context["payload"])
        return True


class StepPipeline:
    """Manages execution of steps based on configuration."""

    def __init__(self):
        self.step_definitions = {
            "estimate": [LoadInstanceStep(), SelectionStep(), PredictionStep(), WriteReportStep()],
            "are-curve": [LoadInstanceStep(), AreCurveStep(), WriteReportStep()],
            "risk-curve": [RiskCurveStep(), WriteReportStep()],
            "simulate": [ScenarioStep(), WriteReportStep()],
            "newsvendor": [NewsvendorStep(), WriteReportStep()],
        }

    def execute(self, config, report_ops) -> int:
        """Execute the pipeline for the configured subcommand and return the exit code."""
        context = {"config": config, "report_ops": report_ops, "warnings": []}

        for step in self.step_definitions.get(config.subcommand, []):
            _say(context, f"\n--- {step.name} ---")
            try:
                success = step.execute(context)
            except DATA_ERRORS as e:
                print(f"❌ {step.name} failed: {e}", file=sys.stderr)
                return EXIT_DATA
            if not success:
                print(f"❌ {step.name} failed.", file=sys.stderr)
                return EXIT_DATA

        for warning in dict.fromkeys(context["warnings"]):
            print(f"⚠️  {warning}", file=sys.stderr)
        return EXIT_OK


def run_cli(argv=None) -> int:
    """Run checkshrink on ``argv`` and return the exit code."""
    try:
        config = CliConfig.load_config(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if config.verbose:
        print(f"Configuration: {config}", file=sys.stderr)

    report_ops = ReportOperations(config)
    return StepPipeline().execute(config, report_ops)


def main():
    """Run the main program."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
