"""
Command-line entry point: run, montecarlo, sysid, gradcheck and plotdata.

Exit codes: 0 when the experiment meets its criterion, 1 when it does not,
2 on configuration errors.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from trailer_loading.core import PipelineConfig, load_config
from trailer_loading.dynamics.params import VesselParams
from trailer_loading.dynamics.sysid import (
    ManeuverLog,
    default_suite,
    generate_maneuvers,
    identify_all,
)
from trailer_loading.planning.trajectory_optimizer import check_gradients, random_problem
from trailer_loading.sim.harness import Outcome, run_scenario
from trailer_loading.sim.monte_carlo import TrialRandomization, calm_control, run_monte_carlo
from trailer_loading.utils.io import read_trace, to_long_format, write_json, write_trace
from trailer_loading.utils.logging import get_logger, set_log_level

logger = get_logger()

EXIT_OK = 0
EXIT_CRITERION = 1
EXIT_CONFIG = 2


def _config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config, args.set)
    if getattr(args, "params", None):
        config = config.model_copy(update={"vessel": VesselParams.from_file(args.params)})
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_scenario(config.scenario, config, args.trace)
    summary = result.to_dict()
    if args.summary:
        write_json(summary, args.summary)
    print(
        f"{config.scenario.name}: {result.outcome.value} "
        f"lateral={result.lateral_offset:.3f} m heading={result.heading_error_deg:.2f} deg "
        f"speed={result.entry_speed:.2f} m/s bails={result.bail_count}"
    )
    return EXIT_OK if result.outcome is Outcome.SUCCESS else EXIT_CRITERION


def cmd_montecarlo(args: argparse.Namespace) -> int:
    config = _config(args)
    randomization = TrialRandomization(min_range=args.min_range, max_range=args.max_range)
    workers = args.workers or os.cpu_count() or 1
    report = run_monte_carlo(
        config.scenario, args.trials, args.seed, config, randomization, workers, args.trace_dir,
    )
    output = report.to_dict()
    passed = report.success_rate >= args.min_success
    if args.calm_control:
        calm = run_monte_carlo(
            calm_control(config.scenario), args.trials, args.seed, config, randomization, workers,
        )
        output["calm_control"] = calm.to_dict()
        passed = passed and calm.success_rate >= args.min_calm_success
    if args.report:
        write_json(output, args.report)
    print(
        f"{report.successes}/{report.n_trials} success ({report.success_rate:.1%}, "
        f"95% CI {report.wilson_low:.1%}-{report.wilson_high:.1%}) [{report.label}]"
    )
    if "calm_control" in output:
        stats = output["calm_control"]["statistics"]
        print(f"calm control: {stats['successes']}/{stats['n_trials']} success")
    return EXIT_OK if passed else EXIT_CRITERION


def cmd_sysid(args: argparse.Namespace) -> int:
    truth = VesselParams.from_file(args.params) if args.params else VesselParams()
    if args.logs:
        logs = [ManeuverLog.from_csv(path) for path in sorted(Path(args.logs).glob("*.csv"))]
        if not logs:
            raise ValueError(f"no maneuver CSV files in {args.logs}")
        reference = None
    else:
        logs = generate_maneuvers(truth, default_suite(), args.noise, args.seed)
        reference = truth
        if args.logs_dir:
            Path(args.logs_dir).mkdir(parents=True, exist_ok=True)
            for log in logs:
                log.to_csv(Path(args.logs_dir) / f"{log.name}.csv")

    derivative = args.derivative or ("savgol" if args.logs or args.noise > 0.0 else "difference")
    identified, reports = identify_all(logs, truth, reference, derivative=derivative)
    if args.output:
        identified.to_file(args.output)
    if args.report:
        write_json({"reports": [report.to_dict() for report in reports]}, args.report)

    for report in reports:
        for name, value in report.estimated.items():
            error = f"{report.relative_error[name]:.2%}" if report.relative_error else "n/a"
            print(f"{name:>4} = {value:12.3f}   rel.err {error}")
    if reference is None:
        return EXIT_OK
    worst = max(max(report.relative_error.values()) for report in reports)
    return EXIT_OK if worst <= args.tolerance else EXIT_CRITERION


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _config(args)
    worst = 0.0
    for index in range(args.problems):
        problem = random_problem(args.seed + index, config.vessel, config.optimizer)
        error = check_gradients(problem, seed=args.seed + index)
        worst = max(worst, error)
        print(f"problem {index}: max relative error {error:.2e}")
    print(f"worst: {worst:.2e} (tolerance {args.tolerance:g})")
    return EXIT_OK if worst < args.tolerance else EXIT_CRITERION


def cmd_plotdata(args: argparse.Namespace) -> int:
    frame = read_trace(args.trace)
    write_trace(to_long_format(frame), args.output)
    print(f"Wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trailer-loading",
        description="Automated trailer loading toolkit",
        epilog="Preset configs for --config: python tools/scenario_generator.py --list",
    )
    parser.add_argument("--log-level", default="WARNING", help="DEBUG, INFO, SOLVE, MODE, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", "-c", help="Pipeline config JSON")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config key")
        p.add_argument("--params", help="Vessel parameter JSON replacing the config's vessel section")

    run = sub.add_parser("run", help="Run one scenario")
    with_config(run)
    run.add_argument("--trace", help="Trace CSV output")
    run.add_argument("--summary", help="Summary JSON output")
    run.set_defaults(handler=cmd_run)

    mc = sub.add_parser("montecarlo", help="Run a randomized batch")
    with_config(mc)
    mc.add_argument("--trials", "-n", type=int, default=200)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--workers", "-j", type=int, default=None, help="Processes (default: CPU count)")
    mc.add_argument("--min-range", type=float, default=40.0)
    mc.add_argument("--max-range", type=float, default=80.0)
    mc.add_argument("--min-success", type=float, default=0.7)
    mc.add_argument("--calm-control", action="store_true", help="Also run the calm-wind control batch")
    mc.add_argument("--min-calm-success", type=float, default=0.95)
    mc.add_argument("--trace-dir", help="Directory for per-trial traces")
    mc.add_argument("--report", "-o", help="Report JSON output")
    mc.set_defaults(handler=cmd_montecarlo)

    sysid = sub.add_parser("sysid", help="Identify damping coefficients")
    sysid.add_argument("--params", help="Generator parameter JSON (defaults to the bundled table)")
    sysid.add_argument("--logs", help="Directory of maneuver CSV logs instead of a synthetic suite")
    sysid.add_argument("--logs-dir", help="Write the synthetic maneuver logs here")
    sysid.add_argument("--noise", type=float, default=0.0, help="Velocity noise std [m/s]")
    sysid.add_argument("--seed", type=int, default=0)
    sysid.add_argument(
        "--derivative", choices=["difference", "savgol"],
        help="Acceleration estimate (default: savgol for noisy or recorded logs)",
    )
    sysid.add_argument("--tolerance", type=float, default=0.01, help="Max relative coefficient error")
    sysid.add_argument("--output", "-o", help="Identified parameter JSON output")
    sysid.add_argument("--report", help="Regression report JSON output")
    sysid.set_defaults(handler=cmd_sysid)

    grad = sub.add_parser("gradcheck", help="Check NLP derivatives against finite differences")
    with_config(grad)
    grad.add_argument("--problems", type=int, default=10)
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--tolerance", type=float, default=1e-4)
    grad.set_defaults(handler=cmd_gradcheck)

    plot = sub.add_parser("plotdata", help="Re-emit a trace in long format")
    plot.add_argument("trace", help="Trace CSV")
    plot.add_argument("--output", "-o", required=True, help="Long-format CSV output")
    plot.set_defaults(handler=cmd_plotdata)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    set_log_level(args.log_level)
    try:
        return args.handler(args)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        logger.error(f"{args.command}: {exc}", module="cli")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
