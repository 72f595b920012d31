"""Variance and ESNR of planner gradients across planning horizons."""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

from dreammpc.analysis.stats import esnr
from dreammpc.config.constants import GRADIENT_SAMPLES_PER_CELL
from dreammpc.envs.base import Environment
from dreammpc.errors import ConfigError
from dreammpc.model.models import (
    GradientCell,
    GradientPlanner,
    GradientSource,
    GradientStudy,
    PlannerConfig,
)
from dreammpc.planners.candidates import rollout_policy_candidates
from dreammpc.planners.objective import ObjectiveOptions, evaluate_plans
from dreammpc.utils.environment import get_max_workers

logger = logging.getLogger(__name__)

GRADIENT_COLUMNS = [
    "env",
    "source",
    "planner",
    "horizon",
    "seed",
    "samples",
    "signal",
    "noise",
    "esnr",
    "mean_first",
    "variance_first",
]


def sample_cell(
    env: Environment,
    horizon: int,
    seed: int,
    samples: int,
    *,
    source: GradientSource,
    planner: GradientPlanner,
    model=None,
    planner_config: PlannerConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Initial action sequences (K, H, A) and the return gradient at each of them.

    The return is the undiscounted reward sum over H steps with no terminal value.
    """
    planner_config = planner_config or PlannerConfig()
    rng = np.random.default_rng([seed, horizon])
    state, obs = env.reset(rng)
    A = env.spec.action_dim

    if planner is GradientPlanner.GRAD_MPC_GAUSSIAN:
        noise = rng.standard_normal((samples, horizon, A))
        actions = np.clip(planner_config.proposal_std * noise, -1.0, 1.0)
    else:
        cfg = planner_config.model_copy(update={"horizon": horizon, "stochastic_candidates": True})
        actions = rollout_policy_candidates(
            model, model.encode(obs), cfg, rng, num_candidates=samples
        ).actions[:, :horizon]

    if source is GradientSource.GROUND_TRUTH:
        grads = np.stack([env.true_rollout_grad(state, a) for a in actions])
    else:
        padded = np.concatenate([actions, actions[:, -1:]], axis=1)
        options = ObjectiveOptions(gamma=1.0, lambda_unc=0.0, intermediate_q=False, terminal_value=False)
        grads = evaluate_plans(model, model.encode(obs), padded, options, with_grad=True).gradients
        grads = grads[:, :horizon]
    return actions, grads


def _cell(env, horizon, seed, samples, source, planner, model, planner_config) -> GradientCell:
    _, grads = sample_cell(
        env,
        horizon,
        seed,
        samples,
        source=source,
        planner=planner,
        model=model,
        planner_config=planner_config,
    )
    flat = grads.reshape(samples, -1)
    mean = flat.mean(axis=0)
    variance = flat.var(axis=0, ddof=1)
    return GradientCell(
        horizon=horizon,
        seed=seed,
        samples=samples,
        mean=mean.tolist(),
        variance=variance.tolist(),
        signal=float(np.sum(mean**2)),
        noise=float(np.sum(variance)),
        esnr=esnr(flat),
    )


def gradient_study(
    env: Environment,
    horizons: list[int],
    seeds: list[int],
    *,
    source: GradientSource,
    planner: GradientPlanner,
    model=None,
    planner_config: PlannerConfig | None = None,
    samples: int = GRADIENT_SAMPLES_PER_CELL,
    max_workers: int | None = None,
) -> GradientStudy:
    """Evaluate every (horizon, seed) cell, in parallel, sorted by horizon then seed."""
    if samples < 2:
        raise ConfigError("gradient study needs at least two samples per cell")
    if model is None and (source is GradientSource.LEARNED_MODEL or planner is GradientPlanner.DREAM_MPC):
        raise ConfigError(f"{source.value}/{planner.value} gradients need a model checkpoint")

    cells_in = [(h, s) for h in horizons for s in seeds]
    workers = max_workers or get_max_workers()
    cells = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(_cell, env, h, s, samples, source, planner, model, planner_config): (h, s)
            for h, s in cells_in
        }
        for future in as_completed(futures):
            horizon, seed = futures[future]
            cells.append(future.result())
            logger.debug("Gradient cell H=%d seed=%d done", horizon, seed)
    cells.sort(key=lambda c: (c.horizon, c.seed))
    return GradientStudy(env=env.spec.name, source=source, planner=planner, cells=cells)


def gradient_rows(study: GradientStudy) -> list[dict]:
    return [
        {
            "env": study.env,
            "source": study.source.value,
            "planner": study.planner.value,
            "horizon": c.horizon,
            "seed": c.seed,
            "samples": c.samples,
            "signal": c.signal,
            "noise": c.noise,
            "esnr": c.esnr,
            "mean_first": c.mean[0],
            "variance_first": c.variance[0],
        }
        for c in study.cells
    ]
