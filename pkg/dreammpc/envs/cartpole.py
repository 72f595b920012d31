"""Cart-pole swing-up with a shaped dense reward and a sparse upright reward."""

import numpy as np

from dreammpc.config.constants import ACTION_REPEAT, CARTPOLE_EPISODE_LENGTH
from dreammpc.envs.base import Environment, EnvSpec, EnvState, wrap_angle

DT = 0.02
GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
HALF_LENGTH = 0.5
MAX_FORCE = 10.0
RAIL_LIMIT = 2.4
MAX_CART_SPEED = 10.0
MAX_POLE_SPEED = 20.0
RESET_NOISE = 0.01
SPARSE_COS_THRESHOLD = 0.995

_TOTAL_MASS = CART_MASS + POLE_MASS
_LN10 = np.log(10.0)


def _gaussian_tolerance(x: float, margin: float) -> float:
    """1 at 0, 0.1 at |x| == margin."""
    return float(np.exp(-_LN10 * (x / margin) ** 2))


class CartpoleSwingup(Environment):
    """State (x, theta, x_dot, theta_dot) with theta = 0 upright; starts hanging down."""

    def __init__(
        self,
        action_repeat: int = ACTION_REPEAT,
        episode_length: int | None = None,
        sparse: bool = False,
    ):
        self.sparse = sparse
        self.spec = EnvSpec(
            name="cartpole_swingup_sparse" if sparse else "cartpole_swingup",
            obs_dim=5,
            action_dim=1,
            episode_length=episode_length or CARTPOLE_EPISODE_LENGTH,
            action_repeat=action_repeat,
            reward_description=(
                "1 if cos(theta) > 0.995 else 0"
                if sparse
                else "upright * centered * small_control * small_velocity in [0, 1]"
            ),
            state_labels=("x", "theta", "x_dot", "theta_dot"),
        )

    def reset(self, rng):
        x = rng.normal(0.0, RESET_NOISE)
        theta = np.pi + rng.normal(0.0, RESET_NOISE)
        state = EnvState(np.array([x, wrap_angle(theta), 0.0, 0.0]), 0, self.spec.episode_length)
        return state, self.observe(state)

    def observe(self, state):
        x, theta, x_dot, theta_dot = state.physics
        return np.array([x, np.cos(theta), np.sin(theta), x_dot, theta_dot])

    def reward(self, physics: np.ndarray, action: float) -> float:
        x, theta, _, theta_dot = physics
        if self.sparse:
            return 1.0 if np.cos(theta) > SPARSE_COS_THRESHOLD else 0.0
        upright = (np.cos(theta) + 1.0) / 2.0
        centered = (1.0 + _gaussian_tolerance(x, 2.0)) / 2.0
        small_control = (4.0 + max(0.0, 1.0 - action**2)) / 5.0
        small_velocity = (1.0 + _gaussian_tolerance(theta_dot, 5.0)) / 2.0
        return float(upright * centered * small_control * small_velocity)

    def _advance(self, physics, action):
        x, theta, x_dot, theta_dot = physics
        a = float(action[0])
        reward = self.reward(physics, a)
        force = MAX_FORCE * a
        sin, cos = np.sin(theta), np.cos(theta)
        temp = (force + POLE_MASS * HALF_LENGTH * theta_dot**2 * sin) / _TOTAL_MASS
        theta_acc = (GRAVITY * sin - cos * temp) / (
            HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos**2 / _TOTAL_MASS)
        )
        x_acc = temp - POLE_MASS * HALF_LENGTH * theta_acc * cos / _TOTAL_MASS

        x_dot = float(np.clip(x_dot + DT * x_acc, -MAX_CART_SPEED, MAX_CART_SPEED))
        theta_dot = float(np.clip(theta_dot + DT * theta_acc, -MAX_POLE_SPEED, MAX_POLE_SPEED))
        x = x + DT * x_dot
        if abs(x) > RAIL_LIMIT:
            x = float(np.sign(x) * RAIL_LIMIT)
            x_dot = 0.0
        theta = float(wrap_angle(theta + DT * theta_dot))
        return np.array([x, theta, x_dot, theta_dot]), reward
