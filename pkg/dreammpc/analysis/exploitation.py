"""Gap between model-predicted and realised returns of the plans a planner picks."""

import numpy as np

from dreammpc.agent.episode import StepRecord, run_episode
from dreammpc.agent.evaluation import episode_rngs
from dreammpc.envs.base import Environment
from dreammpc.errors import ConfigError
from dreammpc.model.models import (
    ExploitationStep,
    ExploitationStudy,
    PlannerConfig,
    PlannerKind,
)
from dreammpc.planners.objective import ObjectiveOptions, evaluate_plans
from dreammpc.planners.registry import build_planner

EXPLOITATION_COLUMNS = ["episode", "step", "predicted", "realized", "gap"]


def realized_return(model, env: Environment, state, plan: np.ndarray) -> float:
    """Discounted true reward of the first H plan actions plus a value re-estimate.

    The re-estimate is the ensemble mean Q at the encoded true state reached after H
    steps and the plan's last action.
    """
    gamma = model.gamma
    H = len(plan) - 1
    total = 0.0
    for k in range(H):
        outcome = env.step(state, plan[k])
        total += gamma**k * outcome.reward
        state = outcome.state
    z_H = model.encode(env.observe(state))
    return total + gamma**H * float(model.q_values(z_H, plan[H]).mean())


def exploitation_study(
    model,
    env: Environment,
    planner_kind: PlannerKind | str,
    planner_config: PlannerConfig,
    episodes: int,
    seed: int,
) -> ExploitationStudy:
    """Per-step predicted J (no uncertainty penalty) against the realised H-step return."""
    planner_kind = PlannerKind(planner_kind)
    if planner_kind is PlannerKind.POLICY:
        raise ConfigError("the exploitation study needs a planning method (mppi or dream_mpc)")
    planner = build_planner(planner_kind, model, planner_config)
    options = ObjectiveOptions(gamma=model.gamma, lambda_unc=0.0, intermediate_q=False)
    steps: list[ExploitationStep] = []

    for episode in range(episodes):
        reset_rng, act_rng = episode_rngs(seed, episode)

        def observe(record: StepRecord, episode=episode) -> None:
            plan = planner.last_plan
            if plan is None:
                return
            predicted = float(evaluate_plans(model, record.latent, plan[None], options).objectives[0])
            realized = realized_return(model, env, record.state, plan)
            steps.append(
                ExploitationStep(
                    episode=episode,
                    step=record.step,
                    predicted=predicted,
                    realized=realized,
                    gap=predicted - realized,
                )
            )

        run_episode(model, env, planner, act_rng, eval_mode=True, observer=observe, reset_rng=reset_rng)

    gaps = [s.gap for s in steps]
    return ExploitationStudy(
        planner=planner_kind,
        horizon=planner_config.horizon,
        steps=steps,
        mean_gap=float(np.mean(gaps)) if gaps else float("nan"),
    )
