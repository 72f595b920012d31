"""Uncertainty-regularized planning objective and its action gradient.

For an action sequence a_0..a_H rolled out from z_0 through the latent dynamics::

    J = sum_{k<H} (gamma^k r_k - lambda u_k) + gamma^H mean(Q(z_H, a_H)) - lambda u_H

with u_k = mean(Q(z_k, a_k)) * std(Q(z_k, a_k)) over the ensemble. The discount
exponent is relative to the first planned step.
"""

import logging
from dataclasses import dataclass

import numpy as np

from dreammpc.errors import DimensionMismatchError, NonFiniteError
from dreammpc.worldmodel.world_model import EvalCounter, ensemble_uncertainty

logger = logging.getLogger(__name__)


@dataclass
class ObjectiveOptions:
    """How a plan is scored.

    ``intermediate_q=False`` skips Q before the terminal step; ``terminal_value=False``
    drops the bootstrap so J is the plain discounted reward sum of the first H actions.
    """

    gamma: float
    lambda_unc: float = 0.0
    abs_mean: bool = False
    stop_grad: bool = False
    use_target: bool = False
    intermediate_q: bool = True
    terminal_value: bool = True


@dataclass
class CandidatePlan:
    """One scored action sequence and the predictions it was scored on."""

    actions: np.ndarray
    latents: np.ndarray
    rewards: np.ndarray
    terminal_q: float
    uncertainties: np.ndarray
    objective: float = float("nan")

    @property
    def horizon(self) -> int:
        return len(self.rewards)


@dataclass
class PlanEvaluation:
    """Objectives (N,), optional gradients (N, H+1, A) and the per-candidate plans."""

    objectives: np.ndarray
    gradients: np.ndarray | None
    plans: list[CandidatePlan]

    @property
    def finite(self) -> np.ndarray:
        ok = np.isfinite(self.objectives)
        if self.gradients is not None:
            ok &= np.isfinite(self.gradients).reshape(len(ok), -1).all(axis=1)
        return ok


def objective(plan: CandidatePlan, gamma: float, lambda_unc: float) -> float:
    """J of an already rolled-out plan."""
    H = plan.horizon
    if len(plan.uncertainties) != H + 1:
        raise DimensionMismatchError(
            f"plan with horizon {H} needs {H + 1} uncertainties, got {len(plan.uncertainties)}"
        )
    discounts = gamma ** np.arange(H)
    j = float(
        np.sum(discounts * plan.rewards)
        + gamma**H * plan.terminal_q
        - lambda_unc * np.sum(plan.uncertainties)
    )
    if not np.isfinite(j):
        logger.debug("Non-finite objective for plan with horizon %d", H)
    return j


def _uncertainty_grad(q: np.ndarray, abs_mean: bool) -> np.ndarray:
    """du/dq for u = mean(q) * population_std(q), rows of shape (N, M)."""
    M = q.shape[-1]
    mean = q.mean(axis=-1, keepdims=True)
    std = q.std(axis=-1, keepdims=True)
    safe_std = np.where(std > 0.0, std, 1.0)
    dstd = np.where(std > 0.0, (q - mean) / (M * safe_std), 0.0)
    if abs_mean:
        return np.sign(mean) * std / M + np.abs(mean) * dstd
    return std / M + mean * dstd


def _evaluate_batch(
    model,
    z0: np.ndarray,
    actions: np.ndarray,
    options: ObjectiveOptions,
    counter: EvalCounter | None,
    with_grad: bool,
) -> PlanEvaluation:
    N, H1, A = actions.shape
    H = H1 - 1
    gamma, lam = options.gamma, options.lambda_unc

    z = np.broadcast_to(z0, (N, z0.shape[-1])).copy()
    latents = [z]
    rewards = np.zeros((N, H))
    uncertainties = np.zeros((N, H + 1))
    dyn_tapes, rew_tapes, q_tapes, q_vals = [], [], [None] * (H + 1), [None] * (H + 1)
    for k in range(H):
        a_k = actions[:, k]
        r_k, r_tape = model.reward_forward(z, a_k, counter)
        rewards[:, k] = r_k
        rew_tapes.append(r_tape)
        if options.intermediate_q:
            q_k, q_tape = model.q_forward(z, a_k, counter, use_target=options.use_target)
            q_vals[k], q_tapes[k] = q_k, q_tape
            uncertainties[:, k] = ensemble_uncertainty(q_k, abs_mean=options.abs_mean)
        z, d_tape = model.dynamics_forward(z, a_k, counter)
        dyn_tapes.append(d_tape)
        latents.append(z)
    if options.terminal_value:
        q_H, q_tapes[H] = model.q_forward(z, actions[:, H], counter, use_target=options.use_target)
        q_vals[H] = q_H
        uncertainties[:, H] = ensemble_uncertainty(q_H, abs_mean=options.abs_mean)
        terminal_q = q_H.mean(axis=-1)
    else:
        terminal_q = np.zeros(N)

    discounts = gamma ** np.arange(H)
    objectives = rewards @ discounts + gamma**H * terminal_q - lam * uncertainties.sum(axis=1)

    gradients = None
    if with_grad:
        gradients = np.zeros_like(actions)
        dz = np.zeros_like(z)
        if options.terminal_value:
            M = q_H.shape[-1]
            dq_H = np.full((N, M), gamma**H / M)
            if lam > 0.0 and not options.stop_grad:
                dq_H = dq_H - lam * _uncertainty_grad(q_H, options.abs_mean)
            back = q_tapes[H].backward(dq_H)
            gradients[:, H] = back.da
            dz = back.dz
        for k in range(H - 1, -1, -1):
            d_back = dyn_tapes[k].backward(dz)
            dz = d_back.dz
            gradients[:, k] = d_back.da
            r_back = rew_tapes[k].backward(np.full(N, discounts[k]))
            dz = dz + r_back.dz
            gradients[:, k] += r_back.da
            if q_tapes[k] is not None and lam > 0.0 and not options.stop_grad:
                q_back = q_tapes[k].backward(-lam * _uncertainty_grad(q_vals[k], options.abs_mean))
                dz = dz + q_back.dz
                gradients[:, k] += q_back.da

    stacked = np.stack(latents, axis=1)
    plans = [
        CandidatePlan(
            actions=actions[n].copy(),
            latents=stacked[n],
            rewards=rewards[n],
            terminal_q=float(terminal_q[n]),
            uncertainties=uncertainties[n],
            objective=float(objectives[n]),
        )
        for n in range(N)
    ]
    return PlanEvaluation(objectives=objectives, gradients=gradients, plans=plans)


def evaluate_plans(
    model,
    z0: np.ndarray,
    actions: np.ndarray,
    options: ObjectiveOptions,
    counter: EvalCounter | None = None,
    *,
    with_grad: bool = False,
) -> PlanEvaluation:
    """Roll out N action sequences of shape (N, H+1, A) from one latent and score them.

    Candidates whose rollout hits a non-finite value get objective NaN (and a NaN
    gradient) instead of raising.
    """
    actions = np.asarray(actions, dtype=np.float64)
    z0 = np.asarray(z0, dtype=np.float64)
    if actions.ndim != 3 or actions.shape[1] < 2:
        raise DimensionMismatchError(f"actions must be (N, H+1, A) with H >= 1, got {actions.shape}")
    try:
        return _evaluate_batch(model, z0, actions, options, counter, with_grad)
    except NonFiniteError:
        logger.warning("Non-finite rollout in a batch of %d candidates; scoring individually", len(actions))

    objectives = np.full(len(actions), np.nan)
    gradients = np.full_like(actions, np.nan) if with_grad else None
    plans = []
    H = actions.shape[1] - 1
    for n in range(len(actions)):
        try:
            single = _evaluate_batch(model, z0, actions[n : n + 1], options, counter, with_grad)
        except NonFiniteError:
            plans.append(
                CandidatePlan(
                    actions=actions[n].copy(),
                    latents=np.full((H + 1, z0.shape[-1]), np.nan),
                    rewards=np.full(H, np.nan),
                    terminal_q=float("nan"),
                    uncertainties=np.full(H + 1, np.nan),
                )
            )
            continue
        objectives[n] = single.objectives[0]
        if with_grad:
            gradients[n] = single.gradients[0]
        plans.append(single.plans[0])
    return PlanEvaluation(objectives=objectives, gradients=gradients, plans=plans)


def record_spent(diagnostics, spent: EvalCounter) -> None:
    """Copy non-dynamics evaluation counts of one planning call into its diagnostics."""
    diagnostics.reward_evals = spent.reward_evals
    diagnostics.q_evals = spent.q_evals
    diagnostics.policy_evals = spent.policy_evals
