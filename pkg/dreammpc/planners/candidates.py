"""Candidate action sequences and their warm start from the previous step."""

from dataclasses import dataclass

import numpy as np

from dreammpc.errors import DimensionMismatchError
from dreammpc.model.models import PlannerConfig
from dreammpc.worldmodel.world_model import EvalCounter


@dataclass
class CandidateSet:
    """N action sequences (N, H+1, A) and the latents they were sampled along (N, H+1, L)."""

    actions: np.ndarray
    latents: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.actions.shape[0]


@dataclass
class ReusePlan:
    """Each candidate's previously optimized sequence, already shifted by one step."""

    shifted: np.ndarray | None = None

    @classmethod
    def empty(cls) -> "ReusePlan":
        return cls(None)

    @classmethod
    def from_optimized(cls, actions: np.ndarray) -> "ReusePlan":
        """Shift (N, H+1, A) sequences forward; the last slot repeats the last action."""
        actions = np.asarray(actions, dtype=np.float64)
        shifted = np.empty_like(actions)
        shifted[:, :-1] = actions[:, 1:]
        shifted[:, -1] = actions[:, -1]
        return cls(shifted)

    @property
    def is_empty(self) -> bool:
        return self.shifted is None


def rollout_policy_candidates(
    model,
    z_t: np.ndarray,
    config: PlannerConfig,
    rng: np.random.Generator,
    counter: EvalCounter | None = None,
    *,
    num_candidates: int | None = None,
) -> CandidateSet:
    """Imagined policy rollouts: N*H dynamics evaluations, N*(H+1) policy evaluations.

    With ``stochastic_candidates`` each candidate samples from the policy. Otherwise
    every row follows the deterministic policy, and the finished greedy sequences
    are perturbed once with N(0, perturb_std^2) noise. The returned latents are
    those of the unperturbed rollout in that case.
    """
    N = config.num_candidates if num_candidates is None else num_candidates
    H = config.horizon
    z = np.broadcast_to(np.asarray(z_t, dtype=np.float64), (N, np.shape(z_t)[-1])).copy()
    stochastic = config.stochastic_candidates
    actions, latents = [], [z]
    for tau in range(H + 1):
        a, _ = model.policy_sample(z, rng if stochastic else None, not stochastic, counter)
        actions.append(a)
        if tau < H:
            z = model.dynamics_step(z, a, counter)
            latents.append(z)
    sequences = np.stack(actions, axis=1)
    if not stochastic and config.perturb_std > 0.0:
        noise = config.perturb_std * rng.standard_normal(sequences.shape)
        sequences = np.clip(sequences + noise, -1.0, 1.0)
    return CandidateSet(actions=sequences, latents=np.stack(latents, axis=1))


def gaussian_candidates(
    config: PlannerConfig, action_dim: int, rng: np.random.Generator, *, num_candidates: int | None = None
) -> CandidateSet:
    """Model-free proposal: clipped N(0, proposal_std^2) sequences."""
    N = config.num_candidates if num_candidates is None else num_candidates
    noise = rng.standard_normal((N, config.horizon + 1, action_dim))
    return CandidateSet(actions=np.clip(config.proposal_std * noise, -1.0, 1.0))


def init_with_reuse(policy_actions: np.ndarray, reuse: ReusePlan, rho: float) -> np.ndarray:
    """a = rho * shifted + (1 - rho) * policy_actions, clipped; no reuse on an empty plan."""
    policy_actions = np.asarray(policy_actions, dtype=np.float64)
    if reuse.is_empty:
        return np.clip(policy_actions, -1.0, 1.0)
    if reuse.shifted.shape != policy_actions.shape:
        raise DimensionMismatchError(
            f"reuse plan shape {reuse.shifted.shape} != candidate shape {policy_actions.shape}"
        )
    return np.clip(rho * reuse.shifted + (1.0 - rho) * policy_actions, -1.0, 1.0)
