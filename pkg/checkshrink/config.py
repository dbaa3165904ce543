"""Configuration module for checkshrink."""
import argparse
import os
import sys

ENV_PREFIX = "CHECKSHRINK__"
THREADS_ENV = "CHECKSHRINK_THREADS"

SUBCOMMANDS = ("estimate", "simulate", "risk-curve", "are-curve", "newsvendor")
SCENARIOS = ("example1", "example2", "example3", "custom")
CASES = ("I", "II", "III", "IV", "V", "VI")
CLASSES = ("origin", "grandmean", "datadriven")
ESTIMATE_METHODS = ("are", "ebml", "ebmm", "unshrunken")
FORMATS = ("json", "csv")

# Lower-case spellings accepted by --methods.
METHOD_NAMES = {
    "are": "ARE",
    "are^g": "ARE^G",
    "are-g": "ARE^G",
    "are^d": "ARE^D",
    "are-d": "ARE^D",
    "ebml": "EBML",
    "ebmm": "EBMM",
    "oraclerisk": "OracleRisk",
    "oracleloss": "OracleLoss",
    "unshrunken": "Unshrunken",
}


class CliArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env(name, cast, parser, flag):
    """Read CHECKSHRINK__<name>, turning a malformed value into a usage error."""
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError:
        parser.error(f"Invalid value {raw!r} for {ENV_PREFIX + name}. Provide a valid {flag} or fix the environment variable.")


def _threads_from_env(parser):
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        parser.error(f"Invalid value {raw!r} for {THREADS_ENV}. Use a non-negative integer (0 = one worker per CPU).")


class CliConfig:
    """Configuration for checkshrink.

    This class serves as a Data Transfer Object (DTO) for configuration settings.
    """

    DEFAULT_SEED = 0
    DEFAULT_RB_REPS = 5
    DEFAULT_RHO = 0.5
    # Threshold constant where the bound on gamma is not positive.
    DEFAULT_FALLBACK_GAMMA = 0.05
    DEFAULT_REPS = 50
    DEFAULT_N = 100
    DEFAULT_RESOLUTION = 200
    DEFAULT_ITEMS = 200
    DEFAULT_MARKUP = 0.15
    DEFAULT_CAPITAL_RATE = 0.15
    DEFAULT_THREADS = 0

    def __init__(self, subcommand=None, input_path=None, output_path=None, method=None, shrinkage_class=None,
                 seed=None, rb_reps=None, rho=None, fallback_gamma=None, grid_size_override=None,
                 grid_max_points=None, output_format=None, threads=None, scenario=None, case=None,
                 sigma_ratio=None, n=None, reps=None, methods=None, theta=None, b=None, h=None, sigma_p=None,
                 sigma_f=None, eta=None, resolution=None, items=None, demand_variance=None, markup=None,
                 capital_rate=None, flat_cost=None, verbose=False):
        """Initialize the CliConfig object with provided or default values."""
        self.subcommand = subcommand
        self.input_path = input_path
        self.output_path = output_path
        self.method = method if method else "are"
        self.shrinkage_class = shrinkage_class if shrinkage_class else "origin"
        self.seed = seed if seed is not None else self.DEFAULT_SEED
        self.rb_reps = rb_reps if rb_reps is not None else self.DEFAULT_RB_REPS
        self.rho = rho if rho is not None else self.DEFAULT_RHO
        self.fallback_gamma = fallback_gamma if fallback_gamma is not None else self.DEFAULT_FALLBACK_GAMMA
        self.grid_size_override = grid_size_override
        self.grid_max_points = grid_max_points
        self.output_format = output_format if output_format else self.default_format(subcommand)
        self.threads = threads if threads is not None else self.DEFAULT_THREADS
        self.scenario = scenario
        self.case = case
        self.sigma_ratio = sigma_ratio
        self.n = n if n is not None else self.DEFAULT_N
        self.reps = reps if reps is not None else self.DEFAULT_REPS
        self.methods = list(methods) if methods else []
        self.theta = theta
        self.b = b
        self.h = h
        self.sigma_p = sigma_p
        self.sigma_f = sigma_f if sigma_f is not None else 1.0
        self.eta = eta if eta is not None else 0.0
        self.resolution = resolution if resolution is not None else self.DEFAULT_RESOLUTION
        self.items = items if items is not None else self.DEFAULT_ITEMS
        self.demand_variance = demand_variance
        self.markup = markup if markup is not None else self.DEFAULT_MARKUP
        self.capital_rate = capital_rate if capital_rate is not None else self.DEFAULT_CAPITAL_RATE
        self.flat_cost = flat_cost if flat_cost is not None else 0.0
        self.verbose = verbose

    @staticmethod
    def default_format(subcommand):
        """Curves are plot data and default to CSV; reports default to JSON."""
        return "csv" if subcommand in ("risk-curve", "are-curve") else "json"

    @classmethod
    def build_parser(cls):
        """Build the argument parser, with defaults taken from the environment where set."""
        parser = CliArgumentParser(
            prog="checkshrink",
            description="Empirical Bayes shrinkage under check loss.",
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        env_seed = _env("SEED", int, parser, "--seed")
        env_rb_reps = _env("RB_REPS", int, parser, "--rb-reps")
        env_rho = _env("RHO", float, parser, "--rho")
        env_fallback = _env("FALLBACK_GAMMA", float, parser, "--fallback-gamma")
        env_reps = _env("REPS", int, parser, "--reps")
        env_format = _env("OUTPUT_FORMAT", str, parser, "--format")
        env_threads = _threads_from_env(parser)
        if env_format is not None and env_format not in FORMATS:
            parser.error(f"Invalid value {env_format!r} for {ENV_PREFIX}OUTPUT_FORMAT. Use one of: {', '.join(FORMATS)}.")

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument(
            "-v", "--verbose",
            action="store_true",
            help="Print progress for every step to stderr.",
        )
        common.add_argument(
            "--seed",
            type=int,
            default=env_seed if env_seed is not None else cls.DEFAULT_SEED,
            help=f"Unsigned 64-bit seed of every random draw ({ENV_PREFIX}SEED).",
        )
        common.add_argument(
            "--rb-reps",
            type=int,
            default=env_rb_reps if env_rb_reps is not None else cls.DEFAULT_RB_REPS,
            help=f"Monte Carlo draws per coordinate in the risk estimate ({ENV_PREFIX}RB_REPS).",
        )
        common.add_argument(
            "--rho",
            type=float,
            default=env_rho if env_rho is not None else cls.DEFAULT_RHO,
            help=f"Fraction of the threshold bound used for gamma, in (0, 1) ({ENV_PREFIX}RHO).",
        )
        common.add_argument(
            "--fallback-gamma",
            type=float,
            default=env_fallback if env_fallback is not None else cls.DEFAULT_FALLBACK_GAMMA,
            help=f"Gamma for coordinates whose threshold bound is not positive ({ENV_PREFIX}FALLBACK_GAMMA).",
        )
        common.add_argument(
            "--grid-size",
            dest="grid_size_override",
            type=int,
            default=None,
            help="Minimum number of tau points on the search grid.",
        )
        common.add_argument(
            "--grid-max-points",
            type=int,
            default=None,
            help="Maximum number of tau points on the search grid.",
        )
        common.add_argument(
            "--format",
            dest="output_format",
            choices=FORMATS,
            default=env_format,
            help=f"Output format; curves default to csv, reports to json ({ENV_PREFIX}OUTPUT_FORMAT).",
        )
        common.add_argument(
            "--output",
            dest="output_path",
            type=str,
            default=None,
            help="File to write the result to (written atomically); stdout when omitted.",
        )
        common.add_argument(
            "--threads",
            type=int,
            default=env_threads if env_threads is not None else cls.DEFAULT_THREADS,
            help=f"Worker threads for replications, 0 = one per CPU ({THREADS_ENV}).",
        )

        subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
        options = {"parents": [common], "formatter_class": argparse.ArgumentDefaultsHelpFormatter}

        estimate = subparsers.add_parser("estimate", help="Select hyperparameters and predict on a data file.", **options)
        estimate.add_argument("--input", dest="input_path", required=True,
                              help="CSV with columns x,sigma_p,sigma_f,b,h and an optional theta.")
        estimate.add_argument("--class", dest="shrinkage_class", choices=CLASSES, default="origin",
                              help="Shrinkage location: 0, the grand mean, or estimated.")
        estimate.add_argument("--method", choices=ESTIMATE_METHODS, default="are", help="Hyperparameter selector.")

        simulate = subparsers.add_parser("simulate", help="Run a simulation scenario.", **options)
        simulate.add_argument("scenario", choices=SCENARIOS, help="Scenario to run.")
        simulate.add_argument("--n", type=int, default=cls.DEFAULT_N, help="Dimension of each instance.")
        simulate.add_argument("--reps", type=int,
                              default=env_reps if env_reps is not None else cls.DEFAULT_REPS,
                              help=f"Number of replications ({ENV_PREFIX}REPS).")
        simulate.add_argument("--sigma-ratio", type=float, default=None,
                              help="sigma_p/sigma_f for example2.")
        simulate.add_argument("--case", choices=CASES, default=None, help="Case of example3.")
        simulate.add_argument("--methods", type=str, default=None,
                              help="Comma-separated methods, e.g. ARE,EBML,EBMM,OracleRisk.")
        simulate.add_argument("--input", dest="input_path", default=None,
                              help="CSV with columns x,sigma_p,sigma_f,b,h,theta for the custom scenario.")
        simulate.add_argument("--class", dest="shrinkage_class", choices=CLASSES, default="origin",
                              help="Class of the baseline rows for the custom scenario.")

        risk = subparsers.add_parser("risk-curve", help="Emit the closed-form risk along alpha.", **options)
        risk.add_argument("--theta", type=float, default=None, help="True mean of a single coordinate.")
        risk.add_argument("--b", type=float, default=None, help="Under-prediction weight.")
        risk.add_argument("--h", type=float, default=None, help="Over-prediction weight (default 1 - b).")
        risk.add_argument("--sigma-p", type=float, default=None, help="Past variance.")
        risk.add_argument("--sigma-f", type=float, default=1.0, help="Future variance.")
        risk.add_argument("--input", dest="input_path", default=None,
                          help="CSV with columns x,sigma_p,sigma_f,b,h,theta for a multivariate curve.")
        risk.add_argument("--class", dest="shrinkage_class", choices=CLASSES, default="origin",
                          help="Shrinkage class of the curve.")
        risk.add_argument("--eta", type=float, default=0.0, help="Location for the datadriven class.")
        risk.add_argument("--resolution", type=int, default=cls.DEFAULT_RESOLUTION,
                          help="Number of equispaced alpha values.")

        are_curve = subparsers.add_parser("are-curve", help="Emit the risk estimate over the search grid.", **options)
        are_curve.add_argument("--input", dest="input_path", required=True,
                               help="CSV with columns x,sigma_p,sigma_f,b,h.")
        are_curve.add_argument("--class", dest="shrinkage_class", choices=CLASSES, default="origin",
                               help="Shrinkage class of the estimate.")

        news = subparsers.add_parser("newsvendor", help="Run the newsvendor study.", **options)
        news.add_argument("--input", dest="input_path", default=None,
                          help="CSV with columns theta,price; a synthetic catalogue when omitted.")
        news.add_argument("--items", type=int, default=cls.DEFAULT_ITEMS, help="Size of the synthetic catalogue.")
        news.add_argument("--demand-variance", type=float, default=None,
                          help="Variance of one month's demand (required).")
        news.add_argument("--markup", type=float, default=cls.DEFAULT_MARKUP, help="Uniform markup m.")
        news.add_argument("--capital-rate", type=float, default=cls.DEFAULT_CAPITAL_RATE,
                          help="Yearly cost of capital behind the holding cost.")
        news.add_argument("--flat-cost", type=float, default=0.0,
                          help="Extra lost-sales cost for high-volume items.")
        news.add_argument("--reps", type=int,
                          default=env_reps if env_reps is not None else cls.DEFAULT_REPS,
                          help=f"Number of replications ({ENV_PREFIX}REPS).")
        return parser

    @classmethod
    def load_config(cls, argv=None):
        """Load configuration from command line arguments, environment variables, or defaults.

        Returns:
            CliConfig: A configuration object.
        """
        parser = cls.build_parser()
        args = parser.parse_args(argv)
        cls._validate(parser, args)

        methods = None
        if getattr(args, "methods", None):
            methods = []
            for name in args.methods.split(","):
                key = name.strip().lower()
                if key not in METHOD_NAMES:
                    parser.error(f"Unknown method {name.strip()!r} in --methods. Use any of: {', '.join(sorted(set(METHOD_NAMES.values())))}.")
                methods.append(METHOD_NAMES[key])

        return cls(
            subcommand=args.subcommand,
            input_path=getattr(args, "input_path", None),
            output_path=args.output_path,
            method=getattr(args, "method", None),
            shrinkage_class=getattr(args, "shrinkage_class", None),
            seed=args.seed,
            rb_reps=args.rb_reps,
            rho=args.rho,
            fallback_gamma=args.fallback_gamma,
            grid_size_override=args.grid_size_override,
            grid_max_points=args.grid_max_points,
            output_format=args.output_format,
            threads=args.threads,
            scenario=getattr(args, "scenario", None),
            case=getattr(args, "case", None),
            sigma_ratio=getattr(args, "sigma_ratio", None),
            n=getattr(args, "n", None),
            reps=getattr(args, "reps", None),
            methods=methods,
            theta=getattr(args, "theta", None),
            b=getattr(args, "b", None),
            h=getattr(args, "h", None),
            sigma_p=getattr(args, "sigma_p", None),
            sigma_f=getattr(args, "sigma_f", None),
            eta=getattr(args, "eta", None),
            resolution=getattr(args, "resolution", None),
            items=getattr(args, "items", None),
            demand_variance=getattr(args, "demand_variance", None),
            markup=getattr(args, "markup", None),
            capital_rate=getattr(args, "capital_rate", None),
            flat_cost=getattr(args, "flat_cost", None),
            verbose=args.verbose,
        )

    @staticmethod
    def _validate(parser, args):
        """Reject values no subcommand can work with."""
        if not 0 <= args.seed < 2**64:
            parser.error("Seed must be an unsigned 64-bit integer. Provide it with --seed or set CHECKSHRINK__SEED.")
        if args.rb_reps < 1:
            parser.error("--rb-reps must be at least 1.")
        if not 0.0 < args.rho < 1.0:
            parser.error("--rho must lie strictly between 0 and 1.")
        if args.fallback_gamma <= 0.0:
            parser.error("--fallback-gamma must be positive.")
        if args.threads < 0:
            parser.error("--threads must be non-negative (0 = one worker per CPU).")
        if args.grid_size_override is not None and args.grid_size_override < 2:
            parser.error("--grid-size must be at least 2.")
        if args.grid_max_points is not None and args.grid_max_points < 2:
            parser.error("--grid-max-points must be at least 2.")
        if getattr(args, "reps", 1) < 1:
            parser.error("--reps must be at least 1.")

        if args.subcommand == "simulate":
            if args.n < 3:
                parser.error("--n must be at least 3.")
            if args.scenario == "example2" and args.sigma_ratio is None:
                parser.error("example2 needs --sigma-ratio.")
            if args.scenario == "example2" and args.sigma_ratio <= 0:
                parser.error("--sigma-ratio must be positive.")
            if args.scenario == "example3" and args.case is None:
                parser.error("example3 needs --case (one of I, II, III, IV, V, VI).")
            if args.scenario == "custom" and not args.input_path:
                parser.error("The custom scenario needs --input with a theta column.")
        elif args.subcommand == "risk-curve":
            if args.resolution < 2:
                parser.error("--resolution must be at least 2.")
            if not args.input_path and None in (args.theta, args.b, args.sigma_p):
                parser.error("risk-curve needs --theta, --b and --sigma-p, or --input.")
        elif args.subcommand == "newsvendor":
            if args.demand_variance is None:
                parser.error("newsvendor needs --demand-variance (the variance of one month's demand).")
            if args.demand_variance <= 0:
                parser.error("--demand-variance must be positive.")
            if args.items < 3:
                parser.error("--items must be at least 3.")

    def __repr__(self):
        """Return a string representation of the configuration.

        Returns:
            str: A string representation of the configuration.
        """
        output = self.output_path if self.output_path else "<stdout>"
        return (f"CliConfig(subcommand='{self.subcommand}', input_path='{self.input_path}', output='{output}', "
                f"method='{self.method}', class='{self.shrinkage_class}', seed={self.seed}, rb_reps={self.rb_reps}, "
                f"rho={self.rho}, fallback_gamma={self.fallback_gamma}, grid_size={self.grid_size_override}, "
                f"format='{self.output_format}', threads={self.threads}, verbose={self.verbose})")
