"""Joint world-model update and policy-prior update.

Both updates are hand-differentiated through the dense stacks: the forward pass keeps
one tape per stack evaluation, and the backward pass replays them in reverse time
order, accumulating parameter gradients per component.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from dreammpc.config.constants import POLICY_SCALE_MOMENTUM, POLICY_SCALE_PERCENTILES
from dreammpc.diffcore.optim import AdamState, adam_step, clip_by_global_norm
from dreammpc.errors import DimensionMismatchError, NonFiniteError
from dreammpc.model.models import LossReport, PolicyLossReport, TrainConfig
from dreammpc.worldmodel.world_model import WorldModel

logger = logging.getLogger(__name__)


@dataclass
class SequenceBatch:
    """B sequences of H transitions: observations (B, H+1, obs), actions (B, H, A), rewards (B, H)."""

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        if self.observations.ndim != 3 or self.actions.ndim != 3 or self.rewards.ndim != 2:
            raise DimensionMismatchError("batch arrays must be (B, H+1, obs), (B, H, A), (B, H)")
        b, h = self.rewards.shape
        if self.actions.shape[:2] != (b, h) or self.observations.shape[:2] != (b, h + 1):
            raise DimensionMismatchError(
                f"inconsistent batch shapes: observations {self.observations.shape}, "
                f"actions {self.actions.shape}, rewards {self.rewards.shape}"
            )

    @property
    def batch_size(self) -> int:
        return self.rewards.shape[0]

    @property
    def horizon(self) -> int:
        return self.rewards.shape[1]


class RunningScale:
    """Moving (5%, 95%) percentile span of Q used to normalise the policy objective."""

    def __init__(
        self,
        momentum: float = POLICY_SCALE_MOMENTUM,
        percentiles: tuple[float, float] = POLICY_SCALE_PERCENTILES,
    ):
        self.momentum = momentum
        self.percentiles = percentiles
        self.value = 1.0

    def propose(self, q: np.ndarray) -> float:
        """The value :meth:`update` would store for this batch; the state is unchanged."""
        lo, hi = np.percentile(np.asarray(q, dtype=np.float64), self.percentiles)
        span = max(float(hi - lo), 1.0)
        return self.momentum * self.value + (1.0 - self.momentum) * span

    def update(self, q: np.ndarray) -> float:
        self.value = self.propose(q)
        return self.value


@dataclass
class TrainingState:
    """Optimizer moments for every trained component plus the policy Q scale."""

    encoder_opt: AdamState
    model_opt: AdamState
    policy_opt: AdamState
    scale: RunningScale = field(default_factory=RunningScale)
    updates: int = 0

    @classmethod
    def create(cls, model: WorldModel) -> "TrainingState":
        return cls(
            encoder_opt=AdamState.zeros_like(model.encoder.parameters()),
            model_opt=AdamState.zeros_like(_model_parameters(model)),
            policy_opt=AdamState.zeros_like(model.policy.parameters()),
        )


def _model_parameters(model: WorldModel) -> list[np.ndarray]:
    params = model.dynamics.parameters() + model.reward.parameters()
    for q in model.q_ensemble:
        params += q.parameters()
    return params


def _accumulate(total: list[np.ndarray] | None, grads: list[np.ndarray]) -> list[np.ndarray]:
    if total is None:
        return [g.copy() for g in grads]
    for t, g in zip(total, grads, strict=True):
        t += g
    return total


def _skipped(reason: str, consistency=float("nan"), reward=float("nan"), value=float("nan")):
    logger.warning("Skipping model update: %s", reason)
    return LossReport(
        consistency=consistency,
        reward=reward,
        value=value,
        total=float("nan"),
        grad_norm=float("nan"),
        applied=False,
    )


def model_update(
    model: WorldModel,
    batch: SequenceBatch,
    state: TrainingState,
    config: TrainConfig,
    rng: np.random.Generator,
) -> LossReport:
    """One joint update of encoder, dynamics, reward and Q-ensemble.

    The latent rollout starts at encode(s_0) and follows the learned dynamics; each
    step t contributes consistency, reward and value losses weighted by
    ``temporal_coef ** t``. Target Q networks are EMA-updated afterwards.
    Non-finite losses or gradients leave every parameter untouched.
    """
    H, B, L = batch.horizon, batch.batch_size, model.latent_dim
    M = model.num_q
    lam = config.temporal_coef
    weights = lam ** np.arange(H)

    try:
        # Stop-gradient targets
        z_targets = [model.encode(batch.observations[:, t]) for t in range(1, H + 1)]
        td = np.stack(
            [model.td_target(batch.rewards[:, t], z_targets[t], rng) for t in range(H)], axis=0
        )

        z0, enc_tape = model.encode_forward(batch.observations[:, 0])
        zs = [z0]
        dyn_tapes, rew_tapes, q_tapes = [], [], []
        reward_preds, q_preds = [], []
        for t in range(H):
            a_t = batch.actions[:, t]
            r_hat, r_tape = model.reward_forward(zs[t], a_t)
            q_hat, q_tape = model.q_forward(zs[t], a_t, dropout_rng=rng)
            z_next, d_tape = model.dynamics_forward(zs[t], a_t)
            reward_preds.append(r_hat)
            q_preds.append(q_hat)
            rew_tapes.append(r_tape)
            q_tapes.append(q_tape)
            dyn_tapes.append(d_tape)
            zs.append(z_next)
    except NonFiniteError as e:
        return _skipped(str(e))

    consistency = sum(
        weights[t] * float(np.mean((zs[t + 1] - z_targets[t]) ** 2)) for t in range(H)
    )
    reward_loss = sum(
        weights[t] * float(np.mean((reward_preds[t] - batch.rewards[:, t]) ** 2)) for t in range(H)
    )
    value_loss = sum(
        weights[t] * float(np.mean((q_preds[t] - td[t][:, None]) ** 2)) for t in range(H)
    )
    total = (
        config.consistency_coef * consistency
        + config.reward_coef * reward_loss
        + config.value_coef * value_loss
    )
    if not np.isfinite(total):
        return _skipped("non-finite loss", consistency, reward_loss, value_loss)

    # Reverse-time replay
    dyn_grads = rew_grads = None
    q_grads: list[list[np.ndarray] | None] = [None] * M
    dz = np.zeros((B, L))
    for t in range(H - 1, -1, -1):
        dz = dz + config.consistency_coef * weights[t] * 2.0 * (zs[t + 1] - z_targets[t]) / (B * L)
        d_back = dyn_tapes[t].backward(dz, with_params=True)
        dyn_grads = _accumulate(dyn_grads, d_back.params[0])

        dr = config.reward_coef * weights[t] * 2.0 * (reward_preds[t] - batch.rewards[:, t]) / B
        r_back = rew_tapes[t].backward(dr, with_params=True)
        rew_grads = _accumulate(rew_grads, r_back.params[0])

        dq = config.value_coef * weights[t] * 2.0 * (q_preds[t] - td[t][:, None]) / (B * M)
        q_back = q_tapes[t].backward(dq, with_params=True)
        for m in range(M):
            q_grads[m] = _accumulate(q_grads[m], q_back.params[m])

        dz = d_back.dz + r_back.dz + q_back.dz
    enc_grads = enc_tape.backward(dz, with_params=True).params

    other_grads = dyn_grads + rew_grads
    for g in q_grads:
        other_grads += g
    clipped, grad_norm = clip_by_global_norm(enc_grads + other_grads, config.grad_clip_norm)
    if not np.isfinite(grad_norm):
        return _skipped("non-finite gradient", consistency, reward_loss, value_loss)

    n_enc = len(enc_grads)
    adam_step(
        model.encoder.parameters(), clipped[:n_enc], state.encoder_opt, config.encoder_learning_rate
    )
    adam_step(_model_parameters(model), clipped[n_enc:], state.model_opt, config.learning_rate)
    model.update_targets(config.target_momentum)
    state.updates += 1

    return LossReport(
        consistency=consistency,
        reward=reward_loss,
        value=value_loss,
        total=float(total),
        grad_norm=grad_norm,
        applied=True,
    )


def policy_update(
    model: WorldModel,
    latents: np.ndarray,
    state: TrainingState,
    config: TrainConfig,
    rng: np.random.Generator,
) -> PolicyLossReport:
    """Maximise scaled mean-ensemble Q at reparameterised samples plus an entropy bonus.

    Only policy parameters move; Q is evaluated without dropout.
    """
    latents = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    B = latents.shape[0]
    M = model.num_q
    alpha = config.entropy_coef

    out = model.policy_forward(latents, rng, keep_tape=True)
    try:
        q, q_tape = model.q_forward(latents, out.action)
    except NonFiniteError as e:
        logger.warning("Skipping policy update: %s", e)
        return PolicyLossReport(
            loss=float("nan"), q_term=float("nan"), entropy=float("nan"),
            scale=state.scale.value, grad_norm=float("nan"), applied=False,
        )
    q_mean = q.mean(axis=-1)
    # committed only once the step is applied
    scale = state.scale.propose(q_mean)
    q_term = float(np.mean(q_mean)) / scale
    log_prob_mean = float(np.mean(out.log_prob))
    loss = alpha * log_prob_mean - q_term
    if not np.isfinite(loss):
        logger.warning("Skipping policy update: non-finite loss")
        return PolicyLossReport(
            loss=loss, q_term=q_term, entropy=-log_prob_mean,
            scale=scale, grad_norm=float("nan"), applied=False,
        )

    # d(-q/scale)/da through the ensemble
    da = q_tape.backward(np.full((B, M), -1.0 / (scale * M * B))).da
    u = out.mean + np.exp(out.log_std) * out.noise
    tanh_u = np.tanh(u)
    std_eps = np.exp(out.log_std) * out.noise
    jac = 1.0 - out.action * out.action
    g_mean = alpha / B * 2.0 * tanh_u + da * jac
    g_log_std = alpha / B * (-1.0 + 2.0 * tanh_u * std_eps) + da * jac * std_eps
    g_log_std = g_log_std * out.clamp_mask

    grads = out.tape.backward(np.concatenate([g_mean, g_log_std], axis=-1), with_params=True).params
    grads, grad_norm = clip_by_global_norm(grads, config.grad_clip_norm)
    if not np.isfinite(grad_norm):
        logger.warning("Skipping policy update: non-finite gradient")
        return PolicyLossReport(
            loss=loss, q_term=q_term, entropy=-log_prob_mean,
            scale=scale, grad_norm=grad_norm, applied=False,
        )
    adam_step(model.policy.parameters(), grads, state.policy_opt, config.learning_rate)
    state.scale.value = scale
    return PolicyLossReport(
        loss=loss,
        q_term=q_term,
        entropy=-log_prob_mean,
        scale=scale,
        grad_norm=grad_norm,
        applied=True,
    )
