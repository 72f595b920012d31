"""The five learned components of the implicit latent world model.

Encoder h, latent dynamics d, reward R, a Q-ensemble with EMA target copies, and a
squashed-Gaussian policy prior. All prediction methods accept a single latent of
shape ``(L,)`` or a batch ``(B, L)``; ``*_forward`` variants additionally return a
tape for reverse-mode gradients through (z, a).
"""

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from dreammpc.diffcore.checkpoint import load_stacks, save_stacks
from dreammpc.diffcore.dense import DenseStack, GradTape, PostOp, simnorm
from dreammpc.errors import CheckpointFormatError, DimensionMismatchError, NonFiniteError
from dreammpc.model.models import ModelConfig

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_HEADER = struct.Struct("<IIIIIIIIdddd")


@dataclass
class EvalCounter:
    """Model evaluations performed while planning; one unit per (z, a) pair."""

    dynamics_evals: int = 0
    reward_evals: int = 0
    q_evals: int = 0
    policy_evals: int = 0

    def snapshot(self) -> "EvalCounter":
        return EvalCounter(self.dynamics_evals, self.reward_evals, self.q_evals, self.policy_evals)

    def since(self, earlier: "EvalCounter") -> "EvalCounter":
        return EvalCounter(
            self.dynamics_evals - earlier.dynamics_evals,
            self.reward_evals - earlier.reward_evals,
            self.q_evals - earlier.q_evals,
            self.policy_evals - earlier.policy_evals,
        )


@dataclass
class LatentGradients:
    """Gradients w.r.t. the (z, a) input of a taped prediction."""

    dz: np.ndarray
    da: np.ndarray
    params: list[list[np.ndarray]] = field(default_factory=list)


class LatentTape:
    """Tape of one stack evaluated on concat(z, a); splits the input gradient."""

    def __init__(self, tape: GradTape, latent_dim: int, scalar_output: bool):
        self._tape = tape
        self._latent_dim = latent_dim
        self._scalar_output = scalar_output

    def backward(self, dy: np.ndarray, *, with_params: bool = False) -> LatentGradients:
        dy = np.asarray(dy, dtype=np.float64)
        if self._scalar_output:
            dy = dy[..., None]
        grads = self._tape.backward(dy, with_params=with_params)
        dx = grads.dx
        return LatentGradients(
            dz=dx[..., : self._latent_dim],
            da=dx[..., self._latent_dim :],
            params=[grads.params] if with_params else [],
        )


class EnsembleTape:
    """Tapes of all ensemble members; backward takes dq of shape (..., M)."""

    def __init__(self, tapes: list[GradTape], latent_dim: int):
        self._tapes = tapes
        self._latent_dim = latent_dim

    def backward(self, dq: np.ndarray, *, with_params: bool = False) -> LatentGradients:
        dq = np.asarray(dq, dtype=np.float64)
        dx = None
        params = []
        for m, tape in enumerate(self._tapes):
            grads = tape.backward(dq[..., m : m + 1], with_params=with_params)
            dx = grads.dx if dx is None else dx + grads.dx
            if with_params:
                params.append(grads.params)
        return LatentGradients(
            dz=dx[..., : self._latent_dim], da=dx[..., self._latent_dim :], params=params
        )


@dataclass
class PolicyOutput:
    """Squashed-Gaussian policy evaluation at a batch of latents."""

    action: np.ndarray
    log_prob: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    noise: np.ndarray
    clamp_mask: np.ndarray
    tape: GradTape | None = None


def ensemble_uncertainty(q: np.ndarray, *, abs_mean: bool = False) -> np.ndarray:
    """mean(q) * population_std(q) over the last axis (ensemble members)."""
    q = np.asarray(q, dtype=np.float64)
    mean = q.mean(axis=-1)
    std = q.std(axis=-1)
    return (np.abs(mean) if abs_mean else mean) * std


def tanh_log_det(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2), computed without cancellation."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class WorldModel:
    """Encoder, dynamics, reward, Q-ensemble (+targets) and policy prior."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        config: ModelConfig,
        encoder: DenseStack,
        dynamics: DenseStack,
        reward: DenseStack,
        q_ensemble: list[DenseStack],
        q_targets: list[DenseStack],
        policy: DenseStack,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.config = config
        self.encoder = encoder
        self.dynamics = dynamics
        self.reward = reward
        self.q_ensemble = q_ensemble
        self.q_targets = q_targets
        self.policy = policy
        self._validate()

    def _validate(self) -> None:
        L, A = self.config.latent_dim, self.action_dim
        expect = {
            "encoder": (self.encoder, self.obs_dim, L),
            "dynamics": (self.dynamics, L + A, L),
            "reward": (self.reward, L + A, 1),
            "policy": (self.policy, L, 2 * A),
        }
        for i, q in enumerate(self.q_ensemble + self.q_targets):
            expect[f"q{i}"] = (q, L + A, 1)
        for name, (stack, d_in, d_out) in expect.items():
            if stack.input_dim != d_in or stack.output_dim != d_out:
                raise DimensionMismatchError(
                    f"{name} maps {stack.input_dim}->{stack.output_dim}, expected {d_in}->{d_out}"
                )
        if len(self.q_ensemble) < 2 or len(self.q_targets) != len(self.q_ensemble):
            raise DimensionMismatchError("Q ensemble needs at least two members and matching targets")
        if self.encoder.layers[-1].post_op is not PostOp.SIMNORM:
            raise DimensionMismatchError("encoder must end in a SimNorm layer")
        if self.dynamics.layers[-1].post_op is not PostOp.SIMNORM:
            raise DimensionMismatchError("dynamics must end in a SimNorm layer")

    @classmethod
    def create(
        cls, obs_dim: int, action_dim: int, config: ModelConfig, rng: np.random.Generator
    ) -> "WorldModel":
        """Freshly initialised model; reward and Q output layers start at zero."""
        L, H, E, V = config.latent_dim, config.hidden_dim, config.encoder_dim, config.simnorm_dim
        A = action_dim
        mish, sim, lin = PostOp.LAYERNORM_MISH, PostOp.SIMNORM, PostOp.LINEAR

        encoder = DenseStack.initialize([obs_dim, E, L], [mish, sim], rng, simnorm_dim=V, name="encoder")
        dynamics = DenseStack.initialize(
            [L + A, H, H, L], [mish, mish, sim], rng, simnorm_dim=V, name="dynamics"
        )
        reward = DenseStack.initialize(
            [L + A, H, H, 1], [mish, mish, lin], rng, simnorm_dim=V, zero_last=True, name="reward"
        )
        q_ensemble = [
            DenseStack.initialize(
                [L + A, H, H, 1],
                [mish, mish, lin],
                rng,
                simnorm_dim=V,
                first_dropout=config.q_dropout,
                zero_last=True,
                name=f"q{m}",
            )
            for m in range(config.num_q)
        ]
        q_targets = [q.copy(name=f"{q.name}_target") for q in q_ensemble]
        policy = DenseStack.initialize(
            [L, H, H, 2 * A], [mish, mish, lin], rng, simnorm_dim=V, name="policy"
        )
        return cls(obs_dim, action_dim, config, encoder, dynamics, reward, q_ensemble, q_targets, policy)

    # ----- properties -----

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    @property
    def num_q(self) -> int:
        return len(self.q_ensemble)

    @property
    def gamma(self) -> float:
        return self.config.discount

    def stacks(self) -> list[DenseStack]:
        """All stacks in checkpoint order."""
        return [self.encoder, self.dynamics, self.reward, self.policy, *self.q_ensemble, *self.q_targets]

    def copy(self) -> "WorldModel":
        return WorldModel(
            self.obs_dim,
            self.action_dim,
            self.config.model_copy(),
            self.encoder.copy(),
            self.dynamics.copy(),
            self.reward.copy(),
            [q.copy() for q in self.q_ensemble],
            [q.copy() for q in self.q_targets],
            self.policy.copy(),
        )

    # ----- helpers -----

    def _join(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64)
        if z.shape[-1] != self.latent_dim or a.shape[-1] != self.action_dim:
            raise DimensionMismatchError(
                f"expected latent width {self.latent_dim} and action width {self.action_dim}, "
                f"got {z.shape} and {a.shape}"
            )
        if z.shape[:-1] != a.shape[:-1]:
            raise DimensionMismatchError(f"batch shapes differ: {z.shape} vs {a.shape}")
        return np.concatenate([z, a], axis=-1)

    @staticmethod
    def _rows(x: np.ndarray) -> int:
        return 1 if x.ndim == 1 else x.shape[0]

    # ----- encoder -----

    def encode(self, observation: np.ndarray) -> np.ndarray:
        """z = h(s). Not counted: encoding happens once per environment step."""
        observation = np.asarray(observation, dtype=np.float64)
        if observation.shape[-1] != self.obs_dim:
            raise DimensionMismatchError(
                f"observation width {observation.shape[-1]} != obs_dim {self.obs_dim}"
            )
        return self.encoder.forward(observation)[0]

    def encode_forward(self, observation: np.ndarray) -> tuple[np.ndarray, GradTape]:
        observation = np.asarray(observation, dtype=np.float64)
        if observation.shape[-1] != self.obs_dim:
            raise DimensionMismatchError(
                f"observation width {observation.shape[-1]} != obs_dim {self.obs_dim}"
            )
        return self.encoder.forward(observation)

    # ----- dynamics / reward / Q -----

    def dynamics_forward(
        self, z: np.ndarray, a: np.ndarray, counter: EvalCounter | None = None
    ) -> tuple[np.ndarray, LatentTape]:
        za = self._join(z, a)
        z_next, tape = self.dynamics.forward(za)
        if counter is not None:
            counter.dynamics_evals += self._rows(za)
        return z_next, LatentTape(tape, self.latent_dim, scalar_output=False)

    def dynamics_step(
        self, z: np.ndarray, a: np.ndarray, counter: EvalCounter | None = None
    ) -> np.ndarray:
        """z' = d(z, a)."""
        return self.dynamics_forward(z, a, counter)[0]

    def reward_forward(
        self, z: np.ndarray, a: np.ndarray, counter: EvalCounter | None = None
    ) -> tuple[np.ndarray, LatentTape]:
        za = self._join(z, a)
        r, tape = self.reward.forward(za)
        if counter is not None:
            counter.reward_evals += self._rows(za)
        return r[..., 0], LatentTape(tape, self.latent_dim, scalar_output=True)

    def predict_reward(self, z: np.ndarray, a: np.ndarray, counter: EvalCounter | None = None):
        """r = R(z, a); a float for a single pair, an array for a batch."""
        r = self.reward_forward(z, a, counter)[0]
        return float(r) if np.ndim(r) == 0 else r

    def q_forward(
        self,
        z: np.ndarray,
        a: np.ndarray,
        counter: EvalCounter | None = None,
        *,
        use_target: bool = False,
        dropout_rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, EnsembleTape]:
        """All ensemble members at (z, a); output shape (..., M)."""
        za = self._join(z, a)
        members = self.q_targets if use_target else self.q_ensemble
        outputs, tapes = [], []
        for stack in members:
            q, tape = stack.forward(za, dropout_rng=dropout_rng)
            outputs.append(q)
            tapes.append(tape)
        if counter is not None:
            counter.q_evals += len(members) * self._rows(za)
        return np.concatenate(outputs, axis=-1), EnsembleTape(tapes, self.latent_dim)

    def q_values(
        self,
        z: np.ndarray,
        a: np.ndarray,
        counter: EvalCounter | None = None,
        *,
        use_target: bool = False,
    ) -> np.ndarray:
        """Ensemble predictions with dropout disabled."""
        return self.q_forward(z, a, counter, use_target=use_target)[0]

    # ----- policy -----

    def policy_forward(
        self,
        z: np.ndarray,
        rng: np.random.Generator | None,
        *,
        deterministic: bool = False,
        counter: EvalCounter | None = None,
        keep_tape: bool = False,
    ) -> PolicyOutput:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise DimensionMismatchError(f"latent width {z.shape[-1]} != {self.latent_dim}")
        out, tape = self.policy.forward(z)
        A = self.action_dim
        mean = out[..., :A]
        raw_log_std = out[..., A:]
        lo, hi = self.config.log_std_min, self.config.log_std_max
        log_std = np.clip(raw_log_std, lo, hi)
        clamp_mask = ((raw_log_std >= lo) & (raw_log_std <= hi)).astype(np.float64)
        if deterministic or rng is None:
            noise = np.zeros_like(mean)
        else:
            noise = rng.standard_normal(mean.shape)
        u = mean + np.exp(log_std) * noise
        action = np.tanh(u)
        log_prob = np.sum(
            -0.5 * noise * noise - log_std - _LOG_SQRT_2PI - tanh_log_det(u), axis=-1
        )
        if counter is not None:
            counter.policy_evals += self._rows(z)
        return PolicyOutput(
            action=action,
            log_prob=log_prob,
            mean=mean,
            log_std=log_std,
            noise=noise,
            clamp_mask=clamp_mask,
            tape=tape if keep_tape else None,
        )

    def policy_sample(
        self,
        z: np.ndarray,
        rng: np.random.Generator | None,
        deterministic: bool = False,
        counter: EvalCounter | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """a ~ tanh(N(mean, std)); ``deterministic`` returns tanh(mean)."""
        out = self.policy_forward(z, rng, deterministic=deterministic, counter=counter)
        log_prob = float(out.log_prob) if np.ndim(out.log_prob) == 0 else out.log_prob
        return out.action, log_prob

    # ----- TD learning -----

    def td_target(
        self, reward: np.ndarray | float, z_next: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray | float:
        """r + gamma * min of two random target members at (z', a'), a' ~ pi(z')."""
        a_next, _ = self.policy_sample(z_next, rng)
        q = self.q_values(z_next, a_next, use_target=True)
        members = rng.choice(self.num_q, size=2, replace=False)
        q_min = np.min(q[..., members], axis=-1)
        target = np.asarray(reward, dtype=np.float64) + self.gamma * q_min
        return float(target) if np.ndim(target) == 0 else target

    def update_targets(self, momentum: float) -> None:
        """target <- momentum * target + (1 - momentum) * online, in place."""
        for online, target in zip(self.q_ensemble, self.q_targets, strict=True):
            for p, t in zip(online.parameters(), target.parameters(), strict=True):
                t *= momentum
                t += (1.0 - momentum) * p


def uniform_latent(latent_dim: int, simnorm_dim: int) -> np.ndarray:
    """The SimNorm image of an all-zero vector."""
    return simnorm(np.zeros(latent_dim), simnorm_dim)


# ----- checkpoints -----


def _pack_header(model: WorldModel) -> bytes:
    cfg = model.config
    return _HEADER.pack(
        model.obs_dim,
        model.action_dim,
        cfg.latent_dim,
        cfg.simnorm_dim,
        model.num_q,
        cfg.hidden_dim,
        cfg.encoder_dim,
        0,
        cfg.discount,
        cfg.q_dropout,
        cfg.log_std_min,
        cfg.log_std_max,
    )


def save_world_model(path: str, model: WorldModel) -> None:
    save_stacks(path, model.stacks(), _pack_header(model))
    logger.info("Saved world model checkpoint to %s", path)


def load_world_model(path: str) -> WorldModel:
    payload = load_stacks(path)
    if len(payload.metadata) != _HEADER.size:
        raise CheckpointFormatError("checkpoint header has unexpected size")
    (
        obs_dim,
        action_dim,
        latent_dim,
        simnorm_dim,
        num_q,
        hidden_dim,
        encoder_dim,
        _reserved,
        discount,
        q_dropout,
        log_std_min,
        log_std_max,
    ) = _HEADER.unpack(payload.metadata)
    if len(payload.stacks) != 4 + 2 * num_q:
        raise CheckpointFormatError(f"expected {4 + 2 * num_q} stacks, found {len(payload.stacks)}")
    config = ModelConfig(
        latent_dim=latent_dim,
        simnorm_dim=simnorm_dim,
        hidden_dim=hidden_dim,
        encoder_dim=encoder_dim,
        num_q=num_q,
        q_dropout=q_dropout,
        log_std_min=log_std_min,
        log_std_max=log_std_max,
        discount=discount,
    )
    names = ["encoder", "dynamics", "reward", "policy"]
    names += [f"q{m}" for m in range(num_q)] + [f"q{m}_target" for m in range(num_q)]
    try:
        stacks = [
            DenseStack(layers, simnorm_dim=simnorm_dim, name=name)
            for layers, name in zip(payload.stacks, names, strict=True)
        ]
        for q in stacks[4 : 4 + num_q]:
            q.layers[0].dropout = q_dropout
        return WorldModel(
            obs_dim,
            action_dim,
            config,
            stacks[0],
            stacks[1],
            stacks[2],
            stacks[4 : 4 + num_q],
            stacks[4 + num_q :],
            stacks[3],
        )
    except (DimensionMismatchError, NonFiniteError) as e:
        raise CheckpointFormatError(f"checkpoint stacks are inconsistent: {e}") from e
