"""Sampling-based MPPI baseline with policy-seeded populations."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from dreammpc.model.models import MPPIConfig, PlanDiagnostics, PlannerConfig, PlannerKind
from dreammpc.planners.candidates import rollout_policy_candidates
from dreammpc.planners.objective import ObjectiveOptions, evaluate_plans, record_spent
from dreammpc.worldmodel.world_model import EvalCounter

logger = logging.getLogger(__name__)


@dataclass
class MPPIWarmStart:
    """Sampling mean and std, each (H+1, A)."""

    mean: np.ndarray
    std: np.ndarray


def mppi_refit(
    actions: np.ndarray,
    scores: np.ndarray,
    config: MPPIConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Softmax-weighted mean and std of the top ``elites`` sequences.

    Weights are softmax((score - best) / temperature); std is clamped to
    [std_min, std_max]. Returns (mean, std, elite indices).
    """
    k = min(config.elites, len(scores))
    order = np.argsort(-scores, kind="stable")[:k]
    elite_scores = scores[order]
    elite_actions = actions[order]
    weights = softmax((elite_scores - elite_scores.max()) / config.temperature)
    mean = np.tensordot(weights, elite_actions, axes=1)
    var = np.tensordot(weights, (elite_actions - mean) ** 2, axes=1)
    std = np.clip(np.sqrt(var), config.std_min, config.std_max)
    return mean, std, order


def _shift(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    out[:-1] = x[1:]
    out[-1] = x[-1]
    return out


def mppi_plan(
    model,
    z_t: np.ndarray,
    config: PlannerConfig,
    warm_start: MPPIWarmStart | None,
    rng: np.random.Generator,
    counter: EvalCounter | None = None,
    *,
    eval_mode: bool = False,
) -> tuple[np.ndarray, MPPIWarmStart | None, PlanDiagnostics]:
    """MPPI over (H+1)-step sequences; returns (action, next warm start, diagnostics).

    Policy rollouts are drawn once and rescored every iteration together with
    freshly sampled Gaussian sequences. Training samples the returned action from
    N(mean, std); evaluation returns the mean.
    """
    counter = counter if counter is not None else EvalCounter()
    mcfg = config.mppi
    H, A = config.horizon, model.action_dim
    options = ObjectiveOptions(
        gamma=model.gamma,
        lambda_unc=config.uncertainty_coef if mcfg.use_uncertainty else 0.0,
        abs_mean=config.uncertainty_abs_mean,
        use_target=config.use_target_q,
        intermediate_q=mcfg.use_uncertainty,
    )
    diagnostics = PlanDiagnostics(planner=PlannerKind.MPPI)
    start = counter.snapshot()

    policy_actions = np.zeros((0, H + 1, A))
    n_policy = min(mcfg.policy_samples, mcfg.population)
    if n_policy > 0:
        policy_actions = rollout_policy_candidates(
            model,
            z_t,
            config.model_copy(update={"stochastic_candidates": True}),
            rng,
            counter,
            num_candidates=n_policy,
        ).actions
    diagnostics.candidate_dynamics_evals = counter.since(start).dynamics_evals

    if warm_start is not None:
        mean = _shift(warm_start.mean)
    else:
        mean = np.zeros((H + 1, A))
    std = np.full((H + 1, A), mcfg.std_max)

    before = counter.dynamics_evals
    scores = None
    best = None
    for _ in range(mcfg.iterations):
        noise = rng.standard_normal((mcfg.population - n_policy, H + 1, A))
        samples = np.clip(mean + std * noise, -1.0, 1.0)
        population = np.concatenate([policy_actions, samples], axis=0)
        objectives = evaluate_plans(model, z_t, population, options, counter).objectives
        scores = np.where(np.isfinite(objectives), objectives, -np.inf)
        if not np.isfinite(scores).any():
            best = None
            break
        mean, std, order = mppi_refit(population, scores, mcfg)
        best = order[0]
    diagnostics.optimization_dynamics_evals = counter.dynamics_evals - before

    diagnostics.nonfinite_candidates = 0 if scores is None else int(np.sum(~np.isfinite(scores)))
    if best is None:
        logger.warning("MPPI elite set is degenerate; using the policy action")
        action, _ = model.policy_sample(z_t, None, True, counter)
        diagnostics.fallback = True
        record_spent(diagnostics, counter.since(start))
        return np.asarray(action, dtype=np.float64), None, diagnostics

    diagnostics.chosen_index = int(best)
    diagnostics.chosen_objective = float(scores[best])
    if eval_mode:
        action = mean[0].copy()
    else:
        action = np.clip(mean[0] + std[0] * rng.standard_normal(A), -1.0, 1.0)
    record_spent(diagnostics, counter.since(start))
    return action, MPPIWarmStart(mean=mean, std=std), diagnostics

