"""Planning latency and evaluation-count benchmarks."""

import logging

import numpy as np

from dreammpc.agent.episode import run_episode
from dreammpc.agent.evaluation import episode_rngs
from dreammpc.config.constants import TIMING_WARMUP_STEPS
from dreammpc.envs.base import Environment
from dreammpc.model.models import (
    PlanDiagnostics,
    PlannerConfig,
    PlannerKind,
    TimingEntry,
    TimingReport,
)
from dreammpc.planners.registry import build_planner

logger = logging.getLogger(__name__)

TIMING_REPORT_COLUMNS = ["planner", "mean_ms", "std_ms", "steps", "episodes"]
PLAN_BENCH_COLUMNS = [
    "call",
    "planner",
    "candidate_dynamics_evals",
    "optimization_dynamics_evals",
    "rescoring_dynamics_evals",
    "total_dynamics_evals",
    "reward_evals",
    "q_evals",
    "policy_evals",
    "chosen_objective",
]


def timing_report(
    model,
    env: Environment,
    planners: list[PlannerKind | str],
    planner_config: PlannerConfig,
    episodes: int,
    seed: int,
    *,
    warmup_steps: int = TIMING_WARMUP_STEPS,
) -> TimingReport:
    """Wall-clock of the plan call per planner; the first ``warmup_steps`` of each episode are dropped."""
    report = TimingReport()
    if episodes <= 0:
        return report
    for kind in planners:
        planner = build_planner(kind, model, planner_config)
        times = []
        for episode in range(episodes):
            reset_rng, act_rng = episode_rngs(seed, episode)
            result = run_episode(model, env, planner, act_rng, eval_mode=True, reset_rng=reset_rng)
            times.extend(result.plan_seconds[warmup_steps:])
        ms = 1000.0 * np.asarray(times)
        report.entries.append(
            TimingEntry(
                planner=PlannerKind(kind),
                mean_ms=float(ms.mean()) if ms.size else float("nan"),
                std_ms=float(ms.std()) if ms.size else float("nan"),
                steps=int(ms.size),
                episodes=episodes,
            )
        )
        logger.info("Timing %s: %.3f ms over %d steps", kind, report.entries[-1].mean_ms, ms.size)
    return report


def plan_bench(
    model,
    env: Environment,
    planner_kind: PlannerKind | str,
    planner_config: PlannerConfig,
    calls: int,
    seed: int,
) -> list[PlanDiagnostics]:
    """Plan ``calls`` times from the encoded reset observation with a fresh planner each time."""
    rng = np.random.default_rng(seed)
    _, obs = env.reset(rng)
    z = model.encode(obs)
    results = []
    for _ in range(calls):
        planner = build_planner(planner_kind, model, planner_config)
        _, diagnostics = planner.act(z, rng, True)
        results.append(diagnostics)
    return results


def plan_bench_rows(diagnostics: list[PlanDiagnostics]) -> list[dict]:
    return [
        {
            "call": i,
            "planner": d.planner.value,
            "candidate_dynamics_evals": d.candidate_dynamics_evals,
            "optimization_dynamics_evals": d.optimization_dynamics_evals,
            "rescoring_dynamics_evals": d.rescoring_dynamics_evals,
            "total_dynamics_evals": d.total_dynamics_evals,
            "reward_evals": d.reward_evals,
            "q_evals": d.q_evals,
            "policy_evals": d.policy_evals,
            "chosen_objective": d.chosen_objective,
        }
        for i, d in enumerate(diagnostics)
    ]
