"""Online training: collect with a planner, learn the world model and policy prior."""

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from dreammpc.agent.evaluation import eval_rows, evaluate
from dreammpc.agent.replay_buffer import ReplayBuffer
from dreammpc.config.constants import CHECKPOINT_SUFFIX
from dreammpc.config.settings import RunConfig
from dreammpc.envs.registry import env_from_config
from dreammpc.errors import ConfigError, NumericalAbortError
from dreammpc.model.models import EvaluationReport, LossReport, PolicyLossReport, RunRecord
from dreammpc.planners.registry import build_planner
from dreammpc.utils.run_logging import CsvStreamWriter
from dreammpc.worldmodel.training import TrainingState, model_update, policy_update
from dreammpc.worldmodel.world_model import WorldModel, save_world_model

logger = logging.getLogger(__name__)

METRICS_COLUMNS = list(RunRecord.model_fields)
TIMING_COLUMNS = ["step", "planner", "mean_ms", "std_ms", "steps", "episodes"]


@dataclass
class TrainResult:
    model: WorldModel
    steps: int
    updates: int
    evaluations: list[EvaluationReport] = field(default_factory=list)
    checkpoint_path: str | None = None


@dataclass
class _Streams:
    init: np.random.Generator
    env: np.random.Generator
    act: np.random.Generator
    update: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "_Streams":
        return cls(*(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)))


def _update_once(
    model: WorldModel,
    buffer: ReplayBuffer,
    state: TrainingState,
    config: RunConfig,
    rng: np.random.Generator,
) -> tuple[LossReport, PolicyLossReport]:
    train_cfg = config.train
    try:
        batch = buffer.sample(train_cfg.batch_size, train_cfg.train_horizon, rng)
    except ValueError as e:
        raise ConfigError(f"cannot sample training sequences: {e}") from e
    loss = model_update(model, batch, state, train_cfg, rng)
    latents = model.encode(batch.observations.reshape(-1, model.obs_dim))
    policy = policy_update(model, latents, state, train_cfg, rng)
    return loss, policy


def train(
    config: RunConfig,
    *,
    metrics: CsvStreamWriter | None = None,
    evals: CsvStreamWriter | None = None,
    timing: CsvStreamWriter | None = None,
    checkpoint_dir: str | None = None,
) -> TrainResult:
    """Seed phase with uniform actions, then plan, step, store and update.

    Exactly ``floor(S * update_to_data_ratio)`` updates run after S post-seed steps.
    More than ``non_finite_streak_limit`` consecutive skipped updates raise
    NumericalAbortError.
    """
    train_cfg = config.train
    streams = _Streams.from_seed(config.run.seed)
    env = env_from_config(config.env)
    spec = env.spec
    model = WorldModel.create(spec.obs_dim, spec.action_dim, config.model, streams.init)
    state = TrainingState.create(model)
    buffer = ReplayBuffer(train_cfg.buffer_capacity, spec.obs_dim, spec.action_dim)
    planner = build_planner(train_cfg.planner, model, config.planner)
    logger.info(
        "Training %s on %s for %d steps (seed %d)",
        train_cfg.planner.value,
        spec.name,
        train_cfg.total_steps,
        config.run.seed,
    )

    result = TrainResult(model=model, steps=0, updates=0)
    env_state, obs = env.reset(streams.env)
    planner.reset()
    episode, episode_step, episode_return = 0, 0, 0.0
    update_budget = 0.0
    streak = 0

    for step in range(train_cfg.total_steps):
        record = RunRecord(step=step, episode=episode, episode_step=episode_step, phase="seed", reward=0.0)
        if step < train_cfg.seed_steps:
            action = streams.act.uniform(-1.0, 1.0, size=spec.action_dim)
        else:
            record.phase = "train"
            action, diag = planner.act(model.encode(obs), streams.act, False)
            record.plan_objective = diag.chosen_objective
            record.candidate_dynamics_evals = diag.candidate_dynamics_evals
            record.optimization_dynamics_evals = diag.optimization_dynamics_evals
            record.rescoring_dynamics_evals = diag.rescoring_dynamics_evals
            record.q_evals = diag.q_evals
            record.policy_evals = diag.policy_evals
            record.plan_grad_norm_mean = diag.grad_norm_mean
            record.planner_fallback = diag.fallback

        outcome = env.step(env_state, action)
        buffer.add(obs, action, outcome.reward, outcome.observation, episode)
        record.reward = outcome.reward
        episode_return += outcome.reward

        if step >= train_cfg.seed_steps:
            update_budget += train_cfg.update_to_data_ratio
            n_updates = int(update_budget + 1e-9)
            update_budget -= n_updates
            for _ in range(n_updates):
                loss, policy = _update_once(model, buffer, state, config, streams.update)
                result.updates += 1
                record.updates += 1
                record.consistency_loss = loss.consistency
                record.reward_loss = loss.reward
                record.value_loss = loss.value
                record.total_loss = loss.total
                record.model_grad_norm = loss.grad_norm
                record.policy_loss = policy.loss
                record.policy_grad_norm = policy.grad_norm
                streak = 0 if loss.applied else streak + 1
                if streak > train_cfg.non_finite_streak_limit:
                    raise NumericalAbortError(
                        f"{streak} consecutive non-finite model updates at step {step}"
                    )

        episode_step += 1
        if outcome.done:
            record.episode_return = episode_return
            logger.info("Episode %d finished at step %d with return %.3f", episode, step, episode_return)
            env_state, obs = env.reset(streams.env)
            planner.reset()
            episode, episode_step, episode_return = episode + 1, 0, 0.0
        else:
            env_state, obs = outcome.state, outcome.observation
        if metrics is not None:
            metrics.write(record)
        result.steps = step + 1

        if train_cfg.eval_interval and (step + 1) % train_cfg.eval_interval == 0 and train_cfg.eval_episodes:
            report = evaluate(
                model, env, train_cfg.planner, config.planner, train_cfg.eval_episodes, config.eval.seed
            )
            result.evaluations.append(report)
            if evals is not None:
                for row in eval_rows(report, step + 1):
                    evals.write(row)
            if timing is not None:
                timing.write(
                    {
                        "step": step + 1,
                        "planner": report.planner.value,
                        "mean_ms": report.mean_plan_ms,
                        "std_ms": report.std_plan_ms,
                        "steps": train_cfg.eval_episodes * spec.episode_length,
                        "episodes": report.episodes,
                    }
                )

    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)
        result.checkpoint_path = os.path.join(checkpoint_dir, f"final{CHECKPOINT_SUFFIX}")
        save_world_model(result.checkpoint_path, model)
    return result
