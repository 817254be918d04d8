"""Command-line interface.

Exit status: 0 on success, 1 when a check or verdict fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import metadata

from . import counterexamples, exact, sim
from .core import SUPERVISED, ScanSpec, default_scan, region_oracle, region_oracle_unsupervised
from .exceptions import ExactCPError
from .io import (DatasetError, RunReport, dumps_report, file_digest, format_text, read_dataset,
                 text_digest)
from .measures import MEASURE_IDS, catalog_entry, get_measure
from .regions import endpoint_discrepancy

SEED_ENV = "EXACTCP_SEED"
DEFAULT_SEED = 20240611
ORACLE_TOL = 1e-6

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _seed(args) -> tuple[int, str]:
    if args.seed is not None:
        return args.seed, "flag"
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
        if not 0 <= value < 2 ** 64:
            raise UsageError(f"{SEED_ENV} must be a 64-bit unsigned integer")
        return value, "environment"
    return DEFAULT_SEED, "default"


def _seed_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _alpha_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _add_common(parser, suppress: bool):
    # subcommand copies must not overwrite values given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=_seed_arg, default=d(None),
                        help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    parser.add_argument("--alpha", type=_alpha_arg, default=d(None), help="miscoverage level in (0, 1)")
    parser.add_argument("--output", "-o", default=d(None), help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("text", "structured"), default=d("text"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)

    parser = _Parser(prog="exactcp", description="Exact conformal prediction intervals.")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", parents=[common], help="closed-form interval for the prediction row")
    p.add_argument("dataset")
    p.add_argument("--shape", choices=exact.SHAPES, default="upper")
    p.add_argument("--eta", type=float, default=None)

    o = sub.add_parser("oracle", parents=[common], help="brute-force region for a catalog measure")
    o.add_argument("dataset")
    o.add_argument("--measure", required=True, help=f"one of: {', '.join(MEASURE_IDS)}")
    o.add_argument("--param", type=float, default=None, help="eta or kappa for the bounded presets")
    o.add_argument("--scan-lower", type=float, default=None)
    o.add_argument("--scan-upper", type=float, default=None)
    o.add_argument("--grid-size", type=int, default=4096)
    o.add_argument("--tol", type=float, default=1e-9)

    c = sub.add_parser("counterexamples", parents=[common], help="run the structural verdicts")
    c.add_argument("--trials", type=_positive_int, default=counterexamples.DEFAULT_TRIALS)

    s = sub.add_parser("simulate", parents=[common], help="coverage simulation from a config")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="JSON config file")
    src.add_argument("--bundled", choices=("example_a", "example_b", "smoke"))
    s.add_argument("--check", action="store_true", help="compare with the bundled reference tables")
    s.add_argument("--replications", type=_positive_int, default=None)
    s.add_argument("--n-jobs", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _alpha(args, default=None) -> float:
    if args.alpha is not None:
        return args.alpha
    if default is not None:
        return default
    raise UsageError("--alpha is required")


def cmd_predict(args, env) -> RunReport:
    data = read_dataset(args.dataset)
    if data.prediction_features is None:
        raise UsageError("dataset has no prediction row (final row with an empty y)")
    alpha = _alpha(args)
    res = exact.solve(data.sample, data.prediction_features, alpha, args.shape, args.eta)
    result = {
        "n": data.sample.n,
        "prediction_features": list(data.prediction_features),
        **res.to_dict(),
    }
    if args.shape == "bounded":
        result["eta_source"] = "given" if args.eta is not None else "default"
    arguments = {"alpha": alpha, "shape": args.shape, "eta": args.eta}
    return RunReport("predict", arguments, file_digest(args.dataset), env, result,
                     warnings=list(res.notes))


def _closed_form(measure_id, data, x_new, alpha, param):
    if measure_id.startswith("poly-sup-"):
        shape = measure_id.rsplit("-", 1)[1]
        return exact.solve(data.sample, x_new, alpha, shape, param).region
    if measure_id.startswith("poly-unsup-"):
        shape = measure_id.rsplit("-", 1)[1]
        return exact.solve_unsupervised(data.sample.y, alpha, shape, param).region
    entry = catalog_entry(measure_id)
    if entry.region_claim is not None:
        return entry.region_claim(data.sample.y, alpha)
    return None


def cmd_oracle(args, env) -> RunReport:
    if args.measure not in MEASURE_IDS:
        raise UsageError(f"unknown measure {args.measure!r}; choose from {', '.join(MEASURE_IDS)}")
    data = read_dataset(args.dataset)
    alpha = _alpha(args)
    param = args.param
    warnings = []
    if args.measure.startswith("poly-"):
        supervised = args.measure.startswith("poly-sup-")
    else:
        supervised = catalog_entry(args.measure).kind == SUPERVISED
    x_new = None
    if supervised:
        if data.prediction_features is None:
            raise UsageError("supervised measures need a prediction row")
        x_new = data.prediction_features
        if args.measure == "poly-sup-bounded" and param is None:
            param = exact.default_eta(data.sample, x_new)
            warnings.append("eta not given; default eta used")
    measure = get_measure(args.measure, param)

    if supervised:
        base = default_scan(data.sample, x_new)
    else:
        base = ScanSpec.around(data.sample.y)
    lower = base.lower if args.scan_lower is None else args.scan_lower
    upper = base.upper if args.scan_upper is None else args.scan_upper
    scan = ScanSpec(lower, upper, args.grid_size, args.tol)
    if supervised:
        region = region_oracle(data.sample, x_new, measure, alpha, scan)
    else:
        region = region_oracle_unsupervised(data.sample.y, measure, alpha, scan)

    result = {
        "measure": args.measure,
        "param": param,
        "n": data.sample.n,
        "critical_count": exact.rank_constants(data.sample.n, alpha).m,
        "scan": {"lower": scan.lower, "upper": scan.upper, "grid_size": scan.grid_size, "tol": scan.tol},
        "region": region.to_dict(),
        "gaps": [list(g) for g in region.gaps()],
    }
    status = EXIT_OK
    closed = _closed_form(args.measure, data, x_new, alpha, param)
    if closed is not None:
        disc = endpoint_discrepancy(region, closed)
        agree = disc <= ORACLE_TOL
        result["comparison"] = {
            "closed_form": closed.to_dict(),
            "oracle_endpoints": region.endpoints(),
            "closed_form_endpoints": closed.endpoints(),
            "max_abs_discrepancy": disc,
            "tolerance": ORACLE_TOL,
            "agree": agree,
        }
        if not agree:
            status = EXIT_FAIL
    elif catalog_entry(args.measure).evaluation_only:
        warnings.append(f"{args.measure}: evaluation only, no closed form attempted")
    if measure.domain is not None:
        warnings.append("restricted-domain measure: region shown is clipped to the scan window")
    arguments = {"alpha": alpha, "measure": args.measure, "param": args.param,
                 "scan_lower": args.scan_lower, "scan_upper": args.scan_upper,
                 "grid_size": args.grid_size, "tol": args.tol}
    return RunReport("oracle", arguments, file_digest(args.dataset), env, result,
                     warnings, status)


def cmd_counterexamples(args, env) -> RunReport:
    report = counterexamples.run_suite(args.trials, env["seed"])
    arguments = {"trials": args.trials}
    return RunReport("counterexamples", arguments, None, env, report.to_dict(),
                     list(report.notes), EXIT_OK if report.all_pass else EXIT_FAIL)


def cmd_simulate(args, env) -> RunReport:
    if args.bundled:
        config = sim.bundled_config(args.bundled)
        source_text = json.dumps(config.to_dict(), sort_keys=True)
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                source_text = fh.read()
            config = sim.SimulationConfig.from_dict(json.loads(source_text))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"invalid config: {exc}") from None
    gen = config.generator
    if env["seed_source"] in ("flag", "environment"):
        gen = sim.GeneratorSpec(gen.id, gen.n, env["seed"], gen.noise_reading)
    else:
        env = {**env, "seed": gen.seed, "seed_source": "config"}
    config = sim.SimulationConfig(
        gen,
        args.replications or config.replications,
        args.alpha if args.alpha is not None else config.alpha,
        config.methods,
        config.eta_rule,
    )
    report = sim.run(config, n_jobs=args.n_jobs)
    result = report.to_dict()
    status = EXIT_OK
    warnings = []
    if args.check:
        cmp = sim.compare_to_reference(report)
        result["comparison"] = cmp
        if not cmp["all_pass"]:
            status = EXIT_FAIL
        flags = cmp.get("lm_length_ratio") or {}
        if flags:
            within = flags["within_tolerance"]
            warnings.append("linear-model length ratio within tolerance under: "
                            + (", ".join(within) if within else "neither definition"))
    if config.replications == 1:
        warnings.append("single replication: coverage is 0 or 1 and its standard error is 0")
    arguments = {"config": args.config, "bundled": args.bundled, "check": args.check,
                 "replications": config.replications, "alpha": config.alpha}
    return RunReport("simulate", arguments, text_digest(source_text), env, result, warnings, status)


COMMANDS = {
    "predict": cmd_predict,
    "oracle": cmd_oracle,
    "counterexamples": cmd_counterexamples,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed, source = _seed(args)
        env = {"seed": seed, "seed_source": source, "package_version": _version()}
        report = COMMANDS[args.command](args, env)
    except (UsageError, DatasetError, ExactCPError, ValueError, OSError) as exc:
        print(f"exactcp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps_report(report) if args.format == "structured" else format_text(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
