"""Value-estimation error of the Q-ensemble against realised returns."""

import logging

import numpy as np

from dreammpc.agent.episode import StepRecord, run_episode
from dreammpc.agent.evaluation import episode_rngs
from dreammpc.analysis.stats import quartile_bins, spearman
from dreammpc.envs.base import Environment
from dreammpc.model.models import PlannerConfig, PlannerKind, ValueEpisode, ValueStudy
from dreammpc.planners.registry import build_planner

logger = logging.getLogger(__name__)

VALUE_COLUMNS = ["episode", "episode_return", "estimate", "abs_error", "q_std", "error_bin"]
VALUE_SUMMARY_COLUMNS = ["pair", "spearman"]


def value_correlations(episodes: list[ValueEpisode]) -> dict[str, float | None]:
    """The three rank correlations; None with fewer than three episodes."""
    if len(episodes) < 3:
        return {"spearman_std_return": None, "spearman_error_return": None, "spearman_std_error": None}
    q_std = [e.q_std for e in episodes]
    returns = [e.episode_return for e in episodes]
    errors = [e.abs_error for e in episodes]
    return {
        "spearman_std_return": spearman(q_std, returns),
        "spearman_error_return": spearman(errors, returns),
        "spearman_std_error": spearman(q_std, errors),
    }


def value_study(
    model,
    env: Environment,
    planner_kind: PlannerKind | str,
    planner_config: PlannerConfig,
    episodes: int,
    seed: int,
    *,
    use_min: bool = False,
) -> ValueStudy:
    """Compare the ensemble value at (z_0, a_0) with the discounted return of each episode.

    ``use_min`` replaces the ensemble mean by the ensemble minimum for the estimate.
    """
    planner = build_planner(planner_kind, model, planner_config)
    gamma = model.gamma
    records = []
    for episode in range(episodes):
        reset_rng, act_rng = episode_rngs(seed, episode)
        first: list[float] = []
        stds: list[float] = []

        def observe(record: StepRecord) -> None:
            q = model.q_values(record.latent, record.action)
            if not first:
                first.append(float(q.min() if use_min else q.mean()))
            stds.append(float(q.std()))

        result = run_episode(
            model, env, planner, act_rng, eval_mode=True, observer=observe, reset_rng=reset_rng
        )
        discounted = float(np.sum(gamma ** np.arange(len(result.rewards)) * np.asarray(result.rewards)))
        records.append(
            ValueEpisode(
                episode=episode,
                episode_return=discounted,
                estimate=first[0],
                abs_error=abs(first[0] - discounted),
                q_std=float(np.mean(stds)),
            )
        )
    for record, bin_id in zip(records, quartile_bins([r.abs_error for r in records]), strict=True):
        record.error_bin = int(bin_id)
    study = ValueStudy(planner=PlannerKind(planner_kind), episodes=records, **value_correlations(records))
    logger.info("Value study over %d episodes finished", episodes)
    return study


def value_summary_rows(study: ValueStudy) -> list[dict]:
    pairs = {
        "q_std~return": study.spearman_std_return,
        "abs_error~return": study.spearman_error_return,
        "q_std~abs_error": study.spearman_std_error,
    }
    return [{"pair": k, "spearman": float("nan") if v is None else v} for k, v in pairs.items()]
