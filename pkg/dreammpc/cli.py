#!/usr/bin/env python3
"""
dreammpc command-line interface

Subcommands: train, eval, plan-bench and study {gradients, value, exploitation, timing}.
Every invocation writes into runs/<name>/ and records a manifest before computing.
Exit codes: 0 success, 2 configuration error, 3 numerical abort, 1 anything else.
"""

import argparse
import json
import logging
import os
import shlex
import sys
from collections.abc import Callable, Sequence

import numpy as np

from ._version import __version__
from .agent.evaluation import EVAL_COLUMNS, eval_rows, evaluate
from .agent.trainer import METRICS_COLUMNS, TIMING_COLUMNS, train
from .analysis.exploitation import EXPLOITATION_COLUMNS, exploitation_study
from .analysis.gradients import GRADIENT_COLUMNS, gradient_rows, gradient_study
from .analysis.timing import (
    PLAN_BENCH_COLUMNS,
    TIMING_REPORT_COLUMNS,
    plan_bench,
    plan_bench_rows,
    timing_report,
)
from .analysis.value import (
    VALUE_COLUMNS,
    VALUE_SUMMARY_COLUMNS,
    value_study,
    value_summary_rows,
)
from .config.constants import (
    CHECKPOINT_DIRECTORY,
    CONFIG_SNAPSHOT_FILENAME,
    DEFAULT_STUDY_HORIZONS,
    EVAL_FILENAME,
    GRADIENT_SAMPLES_PER_CELL,
    MANIFEST_FILENAME,
    METRICS_FILENAME,
    TIMING_FILENAME,
)
from .config.settings import PRESETS, RunConfig, load_run_config
from .envs.base import Environment
from .envs.registry import env_from_config
from .errors import ConfigError, DreamMPCError, RunDirectoryConflictError
from .model.models import (
    ErrorType,
    GradientPlanner,
    GradientSource,
    PlannerKind,
    RunManifest,
    StudyKind,
)
from .utils.file_operations import write_text_atomically
from .utils.run_logging import CsvStreamWriter, configure_logging, log_command_execution, write_csv
from .utils.validation import (
    validate_checkpoint_path,
    validate_config_path,
    validate_horizons,
    validate_run_directory,
)
from .worldmodel.world_model import WorldModel, load_world_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

PLANNER_CHOICES = [k.value for k in PlannerKind]


class RunDirectory:
    """A run's output directory and its manifest lifecycle (created, completed, aborted)."""

    def __init__(self, config: RunConfig, command: str):
        path = os.path.join(config.run.runs_dir, config.run.name)
        is_valid, real_path, error_msg = validate_run_directory(path)
        if not is_valid:
            raise RunDirectoryConflictError(error_msg.removeprefix("Error: "))
        self.path = real_path
        self.manifest = RunManifest(
            run_name=config.run.name,
            command=command,
            config_snapshot=config.render(),
            tool_version=__version__,
            seed=config.run.seed,
        )

    def file(self, name: str) -> str:
        full = os.path.join(self.path, name)
        self.manifest.artifacts[name] = full
        return full

    def open(self) -> None:
        os.makedirs(self.path, exist_ok=True)
        write_text_atomically(self.file(CONFIG_SNAPSHOT_FILENAME), self.manifest.config_snapshot)
        self._write_manifest()

    def finish(self, status: str) -> None:
        self.manifest.status = status
        self._write_manifest()

    def _write_manifest(self) -> None:
        text = json.dumps(self.manifest.model_dump(mode="json"), indent=2, sort_keys=True)
        write_text_atomically(os.path.join(self.path, MANIFEST_FILENAME), text + "\n")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config_path = None
    if args.config is not None:
        is_valid, config_path, error_msg = validate_config_path(args.config)
        if not is_valid:
            raise ConfigError(error_msg.removeprefix("Error: "))
    overrides = list(args.overrides or [])
    if args.name is not None:
        overrides.append(f"run.name={args.name}")
    return load_run_config(config_path, overrides, preset=args.preset)


def _load_model(args: argparse.Namespace, config: RunConfig, env: Environment) -> WorldModel:
    """The checkpoint given by --checkpoint, or a fresh model seeded by run.seed."""
    if args.checkpoint is None:
        logger.warning("No checkpoint given; using an untrained model seeded with %d", config.run.seed)
        rng = np.random.default_rng(config.run.seed)
        return WorldModel.create(env.spec.obs_dim, env.spec.action_dim, config.model, rng)
    is_valid, path, error_msg = validate_checkpoint_path(args.checkpoint)
    if not is_valid:
        raise ConfigError(error_msg.removeprefix("Error: "))
    model = load_world_model(path)
    if model.obs_dim != env.spec.obs_dim or model.action_dim != env.spec.action_dim:
        raise ConfigError(
            f"checkpoint expects obs/action dims ({model.obs_dim}, {model.action_dim}) but "
            f"{env.spec.name} has ({env.spec.obs_dim}, {env.spec.action_dim})"
        )
    return model


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid seed list {text!r}") from e
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def _run(args: argparse.Namespace, body: Callable[[RunConfig, RunDirectory], None]) -> int:
    config = _resolve_config(args)
    run_dir = RunDirectory(config, args.command_line)
    run_dir.open()
    try:
        body(config, run_dir)
    except BaseException:
        run_dir.finish("aborted")
        raise
    run_dir.finish("completed")
    return EXIT_OK


# ===== SUBCOMMANDS =====


@log_command_execution("train")
def cmd_train(args: argparse.Namespace) -> int:
    """Train a world model and policy prior online."""
    if args.steps is not None:
        args.overrides = [*(args.overrides or []), f"train.total_steps={args.steps}"]

    def body(config: RunConfig, run_dir: RunDirectory) -> None:
        with (
            CsvStreamWriter(run_dir.file(METRICS_FILENAME), METRICS_COLUMNS) as metrics,
            CsvStreamWriter(run_dir.file(EVAL_FILENAME), EVAL_COLUMNS) as evals,
            CsvStreamWriter(run_dir.file(TIMING_FILENAME), TIMING_COLUMNS) as timing,
        ):
            result = train(
                config,
                metrics=metrics,
                evals=evals,
                timing=timing,
                checkpoint_dir=os.path.join(run_dir.path, CHECKPOINT_DIRECTORY),
            )
        run_dir.manifest.artifacts["checkpoint"] = result.checkpoint_path
        print(f"Trained {result.steps} steps with {result.updates} updates")
        print(f"Checkpoint: {result.checkpoint_path}")

    return _run(args, body)


@log_command_execution("eval")
def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate a checkpoint with one planner; prints mean ± std of the episode returns."""

    def body(config: RunConfig, run_dir: RunDirectory) -> None:
        env = env_from_config(config.env)
        model = _load_model(args, config, env)
        planner = args.planner or config.eval.planner
        episodes = config.eval.episodes if args.episodes is None else args.episodes
        seed = config.eval.seed if args.seed is None else args.seed
        trajectory = None
        if args.trajectory:
            trajectory = CsvStreamWriter(run_dir.file("trajectory.csv"), env.trajectory_columns())
        try:
            report = evaluate(model, env, planner, config.planner, episodes, seed, trajectory=trajectory)
        finally:
            if trajectory is not None:
                trajectory.close()
        write_csv(run_dir.file(EVAL_FILENAME), eval_rows(report, 0), EVAL_COLUMNS)
        print(
            f"{report.planner.value}: {report.mean_return:.6f} ± {report.std_return:.6f} "
            f"over {report.episodes} episodes"
        )

    return _run(args, body)


@log_command_execution("plan-bench")
def cmd_plan_bench(args: argparse.Namespace) -> int:
    """Repeated single-step planning reporting the evaluation-count breakdown."""

    def body(config: RunConfig, run_dir: RunDirectory) -> None:
        env = env_from_config(config.env)
        model = _load_model(args, config, env)
        planner = args.planner or config.eval.planner
        diagnostics = plan_bench(model, env, planner, config.planner, args.calls, config.run.seed)
        write_csv(run_dir.file("plan_bench.csv"), plan_bench_rows(diagnostics), PLAN_BENCH_COLUMNS)
        if diagnostics:
            d = diagnostics[0]
            print(
                f"{d.planner.value}: candidates={d.candidate_dynamics_evals} "
                f"optimization={d.optimization_dynamics_evals} "
                f"rescoring={d.rescoring_dynamics_evals} total={d.total_dynamics_evals}"
            )

    return _run(args, body)


@log_command_execution("study")
def cmd_study(args: argparse.Namespace) -> int:
    """Run one diagnostic study and write its CSV artifacts."""
    kind = StudyKind(args.kind)

    def body(config: RunConfig, run_dir: RunDirectory) -> None:
        env = env_from_config(config.env)
        env_name = env.spec.name
        planner = args.planner or config.eval.planner
        episodes = config.eval.episodes if args.episodes is None else args.episodes
        seed = config.eval.seed if args.seed is None else args.seed

        if kind is StudyKind.GRADIENTS:
            is_valid, horizons, error_msg = validate_horizons(args.horizons)
            if not is_valid:
                raise ConfigError(error_msg.removeprefix("Error: "))
            source = GradientSource(args.source)
            gradient_planner = GradientPlanner(args.gradient_planner)
            needs_model = (
                source is GradientSource.LEARNED_MODEL or gradient_planner is GradientPlanner.DREAM_MPC
            )
            model = _load_model(args, config, env) if needs_model else None
            try:
                study = gradient_study(
                    env,
                    horizons,
                    _seed_list(args.seeds),
                    source=source,
                    planner=gradient_planner,
                    model=model,
                    planner_config=config.planner,
                    samples=args.samples,
                )
            except NotImplementedError as e:
                raise ConfigError(str(e)) from e
            name = f"gradients_{env_name}_{source.value}_{gradient_planner.value}.csv"
            write_csv(run_dir.file(name), gradient_rows(study), GRADIENT_COLUMNS)
            for cell in study.cells:
                print(f"H={cell.horizon} seed={cell.seed} esnr={cell.esnr:.6g}")
            return

        model = _load_model(args, config, env)
        if kind is StudyKind.VALUE:
            study = value_study(
                model, env, planner, config.planner, episodes, seed, use_min=args.use_min
            )
            stem = f"value_{env_name}_{study.planner.value}_seed{seed}"
            rows = [e.model_dump() for e in study.episodes]
            write_csv(run_dir.file(f"{stem}.csv"), rows, VALUE_COLUMNS)
            write_csv(run_dir.file(f"{stem}_summary.csv"), value_summary_rows(study), VALUE_SUMMARY_COLUMNS)
            print(f"spearman(q_std, return) = {study.spearman_std_return}")
        elif kind is StudyKind.EXPLOITATION:
            study = exploitation_study(model, env, planner, config.planner, episodes, seed)
            name = f"exploitation_{env_name}_{study.planner.value}_seed{seed}.csv"
            write_csv(run_dir.file(name), [s.model_dump() for s in study.steps], EXPLOITATION_COLUMNS)
            print(f"mean gap (predicted - realized) = {study.mean_gap:.6f}")
        else:
            planners = [args.planner] if args.planner else PLANNER_CHOICES
            report = timing_report(model, env, planners, config.planner, episodes, seed)
            rows = [{**e.model_dump(), "planner": e.planner.value} for e in report.entries]
            write_csv(run_dir.file(f"timing_{env_name}_seed{seed}.csv"), rows, TIMING_REPORT_COLUMNS)
            for e in report.entries:
                print(f"{e.planner.value}: {e.mean_ms:.3f} ± {e.std_ms:.3f} ms")

    return _run(args, body)


# ===== ARGUMENT PARSING =====


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration file ([section] key = value)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="Override one configuration value (repeatable)",
    )
    common.add_argument("--preset", choices=sorted(PRESETS), help="Ablation preset")
    common.add_argument("--name", help="Run name (shorthand for --set run.name=NAME)")
    common.add_argument("--verbose", "-v", action="store_true", help="Log progress to stderr")
    return common


def _model_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--checkpoint", help="World model checkpoint (.dmpc)")
    options.add_argument("--planner", choices=PLANNER_CHOICES, help="Action selection method")
    return options


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dreammpc", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dreammpc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, model_options = _common_options(), _model_options()

    p = sub.add_parser("train", parents=[common], help="Train a world model online")
    p.add_argument("--steps", type=int, help="Shorthand for --set train.total_steps=N")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", parents=[common, model_options], help="Evaluate a checkpoint")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trajectory", action="store_true", help="Also write trajectory.csv")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser(
        "plan-bench", parents=[common, model_options], help="Benchmark single planning calls"
    )
    p.add_argument("--calls", type=int, default=10)
    p.set_defaults(handler=cmd_plan_bench)

    p = sub.add_parser("study", parents=[common, model_options], help="Run a diagnostic study")
    p.add_argument("kind", choices=[k.value for k in StudyKind])
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizons", default=",".join(str(h) for h in DEFAULT_STUDY_HORIZONS))
    p.add_argument("--seeds", default="0", help="Comma-separated seeds of the gradient grid")
    p.add_argument("--samples", type=int, default=GRADIENT_SAMPLES_PER_CELL)
    p.add_argument(
        "--source", choices=[s.value for s in GradientSource], default=GradientSource.GROUND_TRUTH.value
    )
    p.add_argument(
        "--gradient-planner",
        choices=[g.value for g in GradientPlanner],
        default=GradientPlanner.GRAD_MPC_GAUSSIAN.value,
    )
    p.add_argument("--use-min", action="store_true", help="Ensemble minimum as value estimate")
    p.set_defaults(handler=cmd_study)
    return parser


def exit_code_for(error: DreamMPCError) -> int:
    if ErrorType.is_config_error(error.error_type):
        return EXIT_CONFIG
    if ErrorType.is_numerical_error(error.error_type):
        return EXIT_NUMERICAL
    return EXIT_INTERNAL


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point of the ``dreammpc`` console script."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    args.command_line = shlex.join(["dreammpc", *argv])
    configure_logging(args.verbose)

    try:
        return args.handler(args)
    except DreamMPCError as e:
        print(f"Error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"Error: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
