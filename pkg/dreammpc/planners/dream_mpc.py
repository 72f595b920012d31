"""Gradient-based MPC over policy-proposed candidates with action reuse."""

import logging
from dataclasses import dataclass

import numpy as np

from dreammpc.errors import DimensionMismatchError
from dreammpc.model.models import PlanDiagnostics, PlannerConfig, PlannerKind, ProposalKind
from dreammpc.planners.candidates import (
    ReusePlan,
    gaussian_candidates,
    init_with_reuse,
    rollout_policy_candidates,
)
from dreammpc.planners.objective import ObjectiveOptions, evaluate_plans, record_spent
from dreammpc.worldmodel.world_model import EvalCounter

logger = logging.getLogger(__name__)


@dataclass
class AscentResult:
    actions: np.ndarray
    objectives: np.ndarray
    grad_norms: np.ndarray
    finite: np.ndarray


def objective_options(model, config: PlannerConfig) -> ObjectiveOptions:
    return ObjectiveOptions(
        gamma=model.gamma,
        lambda_unc=config.uncertainty_coef,
        abs_mean=config.uncertainty_abs_mean,
        stop_grad=config.uncertainty_stop_grad,
        use_target=config.use_target_q,
    )


def ascend(
    model,
    actions: np.ndarray,
    z_t: np.ndarray,
    options: ObjectiveOptions,
    alpha: float,
    counter: EvalCounter | None = None,
) -> AscentResult:
    """One clipped gradient-ascent step for a batch (N, H+1, A) of sequences.

    Candidates with a non-finite objective or gradient keep their actions.
    """
    evaluation = evaluate_plans(model, z_t, actions, options, counter, with_grad=True)
    finite = evaluation.finite
    grads = np.where(finite[:, None, None], evaluation.gradients, 0.0)
    updated = np.where(finite[:, None, None], np.clip(actions + alpha * grads, -1.0, 1.0), actions)
    grad_norms = np.sqrt(np.sum(grads.reshape(len(grads), -1) ** 2, axis=1))
    return AscentResult(updated, evaluation.objectives, grad_norms, finite)


def grad_ascent_step(
    model,
    actions: np.ndarray,
    z_t: np.ndarray,
    gamma: float,
    lambda_unc: float,
    alpha: float,
    counter: EvalCounter | None = None,
    *,
    abs_mean: bool = False,
    stop_grad: bool = False,
) -> tuple[np.ndarray, float]:
    """a <- clip(a + alpha * dJ/da, -1, 1) for one (H+1, A) sequence; returns (a', J(a))."""
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim != 2:
        raise DimensionMismatchError(f"expected an (H+1, A) sequence, got {actions.shape}")
    options = ObjectiveOptions(gamma=gamma, lambda_unc=lambda_unc, abs_mean=abs_mean, stop_grad=stop_grad)
    result = ascend(model, actions[None], z_t, options, alpha, counter)
    if not result.finite[0]:
        logger.warning("Non-finite planning gradient; candidate left unchanged")
    return result.actions[0], float(result.objectives[0])


def dream_mpc_plan(
    model,
    z_t: np.ndarray,
    config: PlannerConfig,
    reuse: ReusePlan,
    rng: np.random.Generator,
    counter: EvalCounter | None = None,
) -> tuple[np.ndarray, ReusePlan, PlanDiagnostics]:
    """Plan one action: propose, warm start, ascend I times, rescore, pick the argmax.

    Returns the first action of the best candidate (lowest index on ties), the
    shifted optimized sequences for the next step, and the eval-count breakdown.
    """
    counter = counter if counter is not None else EvalCounter()
    options = objective_options(model, config)
    diagnostics = PlanDiagnostics(planner=PlannerKind.DREAM_MPC)

    start = counter.snapshot()
    if config.proposal is ProposalKind.GAUSSIAN:
        candidates = gaussian_candidates(config, model.action_dim, rng)
    else:
        candidates = rollout_policy_candidates(model, z_t, config, rng, counter)
    diagnostics.candidate_dynamics_evals = counter.since(start).dynamics_evals

    actions = init_with_reuse(candidates.actions, reuse, config.reuse_coef)

    before = counter.dynamics_evals
    flagged = np.zeros(len(actions), dtype=bool)
    grad_norms = []
    initial = None
    for _ in range(config.iterations):
        result = ascend(model, actions, z_t, options, config.step_size, counter)
        if initial is None:
            initial = result.objectives
        flagged |= ~result.finite
        grad_norms.append(result.grad_norms[result.finite])
        actions = result.actions
    diagnostics.optimization_dynamics_evals = counter.dynamics_evals - before

    before = counter.dynamics_evals
    final = evaluate_plans(model, z_t, actions, options, counter).objectives
    diagnostics.rescoring_dynamics_evals = counter.dynamics_evals - before

    if initial is None:
        initial = final
    diagnostics.initial_objectives = [float(j) for j in initial]
    diagnostics.final_objectives = [float(j) for j in final]
    norms = np.concatenate(grad_norms) if grad_norms else np.zeros(0)
    if norms.size:
        diagnostics.grad_norm_mean = float(norms.mean())
        diagnostics.grad_norm_max = float(norms.max())

    valid = np.isfinite(final) & ~flagged
    diagnostics.nonfinite_candidates = int(np.sum(~valid))
    if not valid.any():
        logger.warning("All %d candidates are non-finite; using the policy action", len(actions))
        action, _ = model.policy_sample(z_t, None, True, counter)
        diagnostics.fallback = True
        record_spent(diagnostics, counter.since(start))
        return np.asarray(action, dtype=np.float64), ReusePlan.empty(), diagnostics

    scores = np.where(valid, final, -np.inf)
    best = int(np.argmax(scores))
    diagnostics.chosen_index = best
    diagnostics.chosen_objective = float(final[best])
    record_spent(diagnostics, counter.since(start))
    return actions[best, 0].copy(), ReusePlan.from_optimized(actions), diagnostics

