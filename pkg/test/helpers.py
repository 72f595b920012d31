"""
Shared test helpers: finite differences, small models and analytic stand-ins.

The analytic models implement only the methods planners call (reward_forward,
q_forward, dynamics_forward, dynamics_step, policy_sample) so that expected values
can be written down by hand.
"""

import numpy as np

from dreammpc.envs.base import Environment, EnvSpec, EnvState
from dreammpc.model.models import ModelConfig
from dreammpc.worldmodel.world_model import LatentGradients, WorldModel


def central_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Numerical gradient of the scalar function ``f`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        plus = x.copy().reshape(-1)
        minus = x.copy().reshape(-1)
        plus[i] += eps
        minus[i] -= eps
        flat[i] = (f(plus.reshape(x.shape)) - f(minus.reshape(x.shape))) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    scale = max(float(np.max(np.abs(numeric))), floor)
    return float(np.max(np.abs(analytic - numeric))) / scale


def small_model_config(**overrides) -> ModelConfig:
    values = dict(
        latent_dim=16, simnorm_dim=4, hidden_dim=16, encoder_dim=16, num_q=3, q_dropout=0.0
    )
    values.update(overrides)
    return ModelConfig(**values)


def randomize_heads(model: WorldModel, rng: np.random.Generator, scale: float = 0.5) -> WorldModel:
    """Give the zero-initialised reward and Q output layers random weights."""
    for stack in [model.reward, *model.q_ensemble]:
        last = stack.layers[-1]
        last.weight[...] = rng.normal(0.0, scale, size=last.weight.shape)
        last.bias[...] = rng.normal(0.0, scale, size=last.bias.shape)
    model.q_targets = [q.copy(name=f"{q.name}_target") for q in model.q_ensemble]
    return model


def make_small_model(
    seed: int = 0, obs_dim: int = 3, action_dim: int = 1, *, random_heads: bool = True, **overrides
) -> WorldModel:
    rng = np.random.default_rng(seed)
    model = WorldModel.create(obs_dim, action_dim, small_model_config(**overrides), rng)
    return randomize_heads(model, rng) if random_heads else model


class _FixedTape:
    def __init__(self, dz_fn, da_fn):
        self._dz_fn = dz_fn
        self._da_fn = da_fn

    def backward(self, dy, *, with_params: bool = False) -> LatentGradients:
        return LatentGradients(dz=self._dz_fn(np.asarray(dy)), da=self._da_fn(np.asarray(dy)))


class QuadraticModel:
    """Identity dynamics, r = -|a|^2 and Q_m = -|a|^2 + offsets[m].

    The policy proposes ``policy_action`` for every row (tanh-free, already in bounds).
    """

    def __init__(
        self,
        latent_dim: int = 2,
        action_dim: int = 1,
        offsets=(0.0, 0.0),
        gamma: float = 0.9,
        policy_action: float = 0.0,
    ):
        self.latent_dim = latent_dim
        self.action_dim = action_dim
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.num_q = len(self.offsets)
        self.gamma = gamma
        self.policy_action = policy_action

    def encode(self, observation):
        observation = np.asarray(observation, dtype=np.float64)
        return np.zeros(observation.shape[:-1] + (self.latent_dim,))

    def dynamics_forward(self, z, a, counter=None):
        if counter is not None:
            counter.dynamics_evals += len(z)
        return np.array(z, copy=True), _FixedTape(lambda dy: dy, lambda dy: np.zeros_like(a))

    def dynamics_step(self, z, a, counter=None):
        return self.dynamics_forward(z, a, counter)[0]

    def reward_forward(self, z, a, counter=None):
        if counter is not None:
            counter.reward_evals += len(z)
        r = -np.sum(a * a, axis=-1)
        return r, _FixedTape(lambda dy: np.zeros_like(z), lambda dy: -2.0 * a * dy[..., None])

    def q_values_at(self, z, a):
        base = -np.sum(a * a, axis=-1, keepdims=True)
        return base + self.offsets

    def q_forward(self, z, a, counter=None, *, use_target=False, dropout_rng=None):
        if counter is not None:
            counter.q_evals += self.num_q * len(z)
        q = self.q_values_at(z, a)
        return q, _FixedTape(
            lambda dq: np.zeros_like(z), lambda dq: -2.0 * a * dq.sum(axis=-1, keepdims=True)
        )

    def q_values(self, z, a, counter=None, *, use_target=False):
        return self.q_values_at(np.asarray(z), np.asarray(a))

    def policy_sample(self, z, rng, deterministic=False, counter=None):
        z = np.asarray(z)
        rows = z.shape[:-1]
        if counter is not None:
            counter.policy_evals += int(np.prod(rows)) if rows else 1
        return np.full(rows + (self.action_dim,), self.policy_action), np.zeros(rows)


class NullEnv(Environment):
    """Zero reward everywhere; the state is a step counter."""

    def __init__(self, episode_length: int = 4, obs_dim: int = 3):
        self.spec = EnvSpec(
            name="null",
            obs_dim=obs_dim,
            action_dim=1,
            episode_length=episode_length,
            action_repeat=1,
            reward_description="0",
            state_labels=("t",),
        )

    def reset(self, rng):
        state = EnvState(np.array([0.0]), 0, self.spec.episode_length)
        return state, self.observe(state)

    def observe(self, state):
        return np.full(self.spec.obs_dim, 0.1 * state.physics[0])

    def _advance(self, physics, action):
        return physics + 1.0, 0.0
