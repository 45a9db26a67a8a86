# app/cli.py
"""
Command-line entry point: run suites or single trials, build and render
geodesic fields, run the derivative and oracle checks, and re-aggregate
results files.

Exit codes: 0 on success, 1 when a check or planner step fails, 2 on usage
or configuration errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from app.config.settings import configure_logging, settings
from app.core.checks import CHECK_GROUPS, run_checks
from app.core.exceptions import (
    ConfigurationException,
    InvalidParameterException,
    PlannerException,
)
from app.core.heat import build_geodesic_field, rasterize_workspace, transient_heat
from app.core.rendering import render_distance, render_heat_frames, render_trajectory
from app.core.solver import IterationRecord
from app.core.storage import FieldCache, ResultStore, atomic_write_text
from app.models.config import ExperimentConfig, load_config
from app.services.benchmarks import Condition, ResultsTable, run_suite, run_trial

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _output_dir(args: argparse.Namespace, config: ExperimentConfig | None = None) -> Path:
    # --out, then OUTPUT_DIR, then the config document
    if getattr(args, "out", None):
        return Path(args.out)
    if settings.output_dir:
        return Path(settings.output_dir)
    if config is not None:
        return Path(config.output_dir)
    return Path("results")


def _slug(label: str) -> str:
    return label.replace(":", "_")


def _print_record(record: IterationRecord) -> None:
    print(json.dumps(record.to_dict()), flush=True)


def cmd_run(args: argparse.Namespace) -> int:
    """
    Run the configured suite, or a single trial with --goal-index and --condition.

    :param args: Parsed arguments
    :type args: argparse.Namespace
    :return: Exit code
    :rtype: int
    """
    config = load_config(args.config)
    env = config.to_environment()
    out = _output_dir(args, config)
    trial_settings = config.to_settings(args.time_limit, str(out / "fields"))
    conditions = [Condition.parse(args.condition)] if args.condition else config.condition_list()

    if args.goal_index is not None and len(conditions) == 1:
        goal = config.goal(args.goal_index)
        trace = _print_record if args.verbose else None
        result = run_trial(env, goal, conditions[0], trial_settings, args.goal_index, trace=trace)
        store = ResultStore(out / "results.jsonl")
        store.upsert([result.to_dict()])
        if result.configurations is not None:
            render_trajectory(
                env.workspace,
                env.robot,
                result.configurations,
                goal,
                out / f"trajectory_{args.goal_index:02d}_{_slug(result.condition)}.svg",
            )
        table = ResultsTable(store.records)
    else:
        goal_indices = None if args.goal_index is None else [args.goal_index]
        parallelism = args.parallelism or config.parallelism
        table = run_suite(
            env,
            conditions,
            trial_settings,
            parallelism,
            ResultStore(out / "results.jsonl"),
            goal_indices,
        )
    paths = table.write(out)
    logger.info("wrote %s", ", ".join(str(p) for p in paths))
    print(table.to_text(), end="")
    return EXIT_OK


def cmd_field(args: argparse.Namespace) -> int:
    """
    Build (or load) the geodesic field of one goal and render it.

    :param args: Parsed arguments
    :type args: argparse.Namespace
    :return: Exit code
    :rtype: int
    """
    config = load_config(args.config)
    env = config.to_environment()
    out = _output_dir(args, config)
    if args.goal is not None:
        goal = np.asarray(args.goal, dtype=float)
        if goal.shape != (env.workspace.dimension,):
            raise InvalidParameterException("goal", f"expected {env.workspace.dimension} values")
    else:
        goal = config.goal(args.goal_index or 0)

    trial_settings = config.to_settings()
    field_ = build_geodesic_field(
        env.workspace,
        goal,
        trial_settings.cell_size,
        trial_settings.blend_radius,
        trial_settings.heat,
        FieldCache(out / "fields"),
    )
    image = render_distance(field_, out / "field.png", env.workspace)
    print(f"field shape={field_.distance.shape} cell_size={field_.distance.cell_size:.4f}")
    print(f"wrote {image}")
    for warning in field_.warnings:
        print(f"warning: {warning}")

    if args.emit_heat_frames:
        grid = rasterize_workspace(env.workspace, field_.distance.cell_size)
        frames = transient_heat(grid, goal, args.frames, params=trial_settings.heat)
        for path in render_heat_frames(frames, goal, out / "heat"):
            print(f"wrote {path}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    """
    Run the derivative, geodesic-oracle and solver checks.

    :param args: Parsed arguments
    :type args: argparse.Namespace
    :return: Exit code, 1 if any check fails
    :rtype: int
    """
    config = load_config(args.config)
    env = config.to_environment()
    goal = config.goal(args.goal_index or 0)
    seed = config.seed if args.seed is None else args.seed
    groups = tuple(args.filter) if args.filter else None
    results = run_checks(env.scene(), goal, seed, groups, args.samples, config.field.cell_size)

    for result in results:
        verdict = "PASS" if result.passed else "FAIL"
        print(
            f"{verdict} {result.group}.{result.name} max_error={result.max_error:.3e} "
            f"tolerance={result.tolerance:.1e} samples={result.samples}"
        )
    out = _output_dir(args, config)
    atomic_write_text(
        out / "checks.json", json.dumps([r.to_dict() for r in results], indent=2) + "\n"
    )
    failed = [f"{r.group}.{r.name}" for r in results if not r.passed]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    """
    Re-aggregate a results file into the text and CSV tables.

    :param args: Parsed arguments
    :type args: argparse.Namespace
    :return: Exit code
    :rtype: int
    """
    path = Path(args.results)
    if not path.is_file():
        raise ConfigurationException(f"results file not found: {path}")
    table = ResultsTable.from_file(path)
    out = Path(args.out) if args.out else path.parent
    table.write(out)
    print(table.to_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planner", description="Geodesic trajectory optimization benchmarks"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a benchmark suite or a single trial")
    run.add_argument("--config", required=True, help="Experiment YAML document")
    run.add_argument("--goal-index", type=int, default=None)
    run.add_argument("--condition", default=None, help="e.g. geodesic-flow:50")
    run.add_argument("--parallelism", type=int, default=None)
    run.add_argument("--time-limit", type=float, default=None, help="Solver wall clock (s)")
    run.add_argument("--out", default=None, help="Output directory")
    run.set_defaults(handler=cmd_run)

    field = sub.add_parser("field", help="Build and render a geodesic field")
    field.add_argument("--config", required=True)
    field.add_argument("--goal", type=float, nargs="+", default=None)
    field.add_argument("--goal-index", type=int, default=None)
    field.add_argument("--emit-heat-frames", action="store_true")
    field.add_argument("--frames", type=int, default=4)
    field.add_argument("--out", default=None)
    field.set_defaults(handler=cmd_field)

    check = sub.add_parser("check", help="Run derivative and oracle checks")
    check.add_argument("--config", required=True)
    check.add_argument("--filter", action="append", choices=CHECK_GROUPS, default=None)
    check.add_argument("--samples", type=int, default=100)
    check.add_argument("--seed", type=int, default=None)
    check.add_argument("--goal-index", type=int, default=None)
    check.add_argument("--out", default=None)
    check.set_defaults(handler=cmd_check)

    table = sub.add_parser("table", help="Aggregate a results file")
    table.add_argument("results", help="results.jsonl")
    table.add_argument("--out", default=None)
    table.set_defaults(handler=cmd_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    """
    Parse arguments and dispatch to a subcommand.

    :param argv: Arguments (defaults to ``sys.argv[1:]``)
    :type argv: list[str] | None
    :return: Exit code
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)
    try:
        return args.handler(args)
    except (ConfigurationException, InvalidParameterException) as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except PlannerException as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_FAILURE
