"""Deterministic evaluation of a frozen model under a chosen planner."""

import logging

import numpy as np

from dreammpc.agent.episode import StepRecord, run_episode
from dreammpc.envs.base import Environment
from dreammpc.model.models import EvaluationReport, PlannerConfig, PlannerKind
from dreammpc.planners.registry import build_planner
from dreammpc.utils.run_logging import CsvStreamWriter
from dreammpc.worldmodel.world_model import load_world_model

logger = logging.getLogger(__name__)

EVAL_COLUMNS = ["step", "planner", "seed", "episode", "episode_return"]


def episode_rngs(seed: int, episode: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (reset, planning) streams for one evaluation episode."""
    return np.random.default_rng([seed, episode, 0]), np.random.default_rng([seed, episode, 1])


def _trajectory_observer(writer: CsvStreamWriter, env: Environment, episode: int):
    labels = env.spec.state_labels

    def observe(record: StepRecord) -> None:
        row = {"episode": episode, "step": record.step, "reward": record.reward}
        row.update(zip(labels, record.state.physics.tolist(), strict=True))
        row.update({f"action_{i}": float(a) for i, a in enumerate(record.action)})
        writer.write(row)

    return observe


def evaluate(
    model,
    env: Environment,
    planner_kind: PlannerKind | str,
    planner_config: PlannerConfig,
    episodes: int,
    seed: int,
    *,
    trajectory: CsvStreamWriter | None = None,
) -> EvaluationReport:
    """Run ``episodes`` evaluation episodes with per-episode seeded streams.

    Evaluation acts in eval mode: policy mean, MPPI mean, and Dream-MPC candidates
    drawn from a stream fixed by (seed, episode).
    """
    planner = build_planner(planner_kind, model, planner_config)
    returns, plan_ms = [], []
    for episode in range(episodes):
        reset_rng, act_rng = episode_rngs(seed, episode)
        observer = _trajectory_observer(trajectory, env, episode) if trajectory else None
        result = run_episode(
            model, env, planner, act_rng, eval_mode=True, observer=observer, reset_rng=reset_rng
        )
        returns.append(result.episode_return)
        plan_ms.extend(1000.0 * s for s in result.plan_seconds)
        logger.info("Evaluation episode %d return %.3f", episode, result.episode_return)

    return EvaluationReport(
        planner=PlannerKind(planner_kind),
        seed=seed,
        episodes=episodes,
        mean_return=float(np.mean(returns)) if returns else float("nan"),
        std_return=float(np.std(returns)) if returns else float("nan"),
        returns=returns,
        mean_plan_ms=float(np.mean(plan_ms)) if plan_ms else float("nan"),
        std_plan_ms=float(np.std(plan_ms)) if plan_ms else float("nan"),
    )


def evaluate_checkpoint(
    path: str,
    env: Environment,
    planner_kind: PlannerKind | str,
    planner_config: PlannerConfig,
    episodes: int,
    seed: int,
    **kwargs,
) -> EvaluationReport:
    model = load_world_model(path)
    return evaluate(model, env, planner_kind, planner_config, episodes, seed, **kwargs)


def eval_rows(report: EvaluationReport, step: int) -> list[dict]:
    return [
        {
            "step": step,
            "planner": report.planner.value,
            "seed": report.seed,
            "episode": i,
            "episode_return": ret,
        }
        for i, ret in enumerate(report.returns)
    ]
