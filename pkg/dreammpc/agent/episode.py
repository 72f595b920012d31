"""The environment loop shared by evaluation and the analysis studies."""

import time
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from dreammpc.envs.base import Environment, EnvState
from dreammpc.model.models import PlanDiagnostics


@dataclass
class StepRecord:
    """What happened at one decision step."""

    step: int
    state: EnvState
    observation: np.ndarray
    latent: np.ndarray
    action: np.ndarray
    reward: float
    next_state: EnvState
    next_observation: np.ndarray
    diagnostics: PlanDiagnostics
    plan_seconds: float


@dataclass
class EpisodeResult:
    episode_return: float
    steps: int
    rewards: list[float] = field(default_factory=list)
    plan_seconds: list[float] = field(default_factory=list)


def run_episode(
    model,
    env: Environment,
    planner,
    rng: np.random.Generator,
    *,
    eval_mode: bool,
    observer: Callable[[StepRecord], None] | None = None,
    reset_rng: np.random.Generator | None = None,
) -> EpisodeResult:
    """Run one episode to its length limit; only the plan call is timed."""
    state, obs = env.reset(reset_rng if reset_rng is not None else rng)
    planner.reset()
    result = EpisodeResult(episode_return=0.0, steps=0)
    done = False
    while not done:
        z = model.encode(obs)
        start = time.perf_counter()
        action, diagnostics = planner.act(z, rng, eval_mode)
        elapsed = time.perf_counter() - start
        step = env.step(state, action)
        if observer is not None:
            observer(
                StepRecord(
                    step=result.steps,
                    state=state,
                    observation=obs,
                    latent=z,
                    action=np.asarray(action, dtype=np.float64),
                    reward=step.reward,
                    next_state=step.state,
                    next_observation=step.observation,
                    diagnostics=diagnostics,
                    plan_seconds=elapsed,
                )
            )
        result.episode_return += step.reward
        result.rewards.append(step.reward)
        result.plan_seconds.append(elapsed)
        result.steps += 1
        state, obs, done = step.state, step.observation, step.done
    return result
