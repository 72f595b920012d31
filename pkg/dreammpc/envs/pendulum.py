"""Frictionless pendulum swing-up with theta = 0 upright."""

import numpy as np

from dreammpc.config.constants import ACTION_REPEAT, PENDULUM_EPISODE_LENGTH
from dreammpc.envs.base import Environment, EnvSpec, EnvState, wrap_angle

DT = 0.05
GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
MAX_TORQUE = 2.0
MAX_SPEED = 8.0
RESET_NOISE = 0.05

_ANGULAR = 3.0 * GRAVITY / (2.0 * LENGTH)
_TORQUE_GAIN = 3.0 / (MASS * LENGTH**2)


def pendulum_cost(theta, omega, torque):
    return wrap_angle(theta) ** 2 + 0.1 * omega**2 + 0.001 * torque**2


def mechanical_energy(theta, omega):
    """Kinetic plus potential energy of the uniform rod (m = l = 1)."""
    return MASS * LENGTH**2 * omega**2 / 6.0 + MASS * GRAVITY * LENGTH / 2.0 * np.cos(theta)


class PendulumSwingup(Environment):
    """Semi-implicit Euler at dt=0.05; torque = 2 * action; speed clipped to +-8."""

    def __init__(self, action_repeat: int = ACTION_REPEAT, episode_length: int | None = None):
        self.spec = EnvSpec(
            name="pendulum_swingup",
            obs_dim=3,
            action_dim=1,
            episode_length=episode_length or PENDULUM_EPISODE_LENGTH,
            action_repeat=action_repeat,
            reward_description="-(theta^2 + 0.1 omega^2 + 0.001 torque^2), summed over repeats",
            state_labels=("theta", "omega"),
        )

    def reset(self, rng):
        theta = np.pi + rng.uniform(-RESET_NOISE, RESET_NOISE)
        omega = rng.uniform(-RESET_NOISE, RESET_NOISE)
        state = EnvState(np.array([wrap_angle(theta), omega]), 0, self.spec.episode_length)
        return state, self.observe(state)

    def state_at(self, theta: float, omega: float = 0.0) -> EnvState:
        return EnvState(np.array([float(theta), float(omega)]), 0, self.spec.episode_length)

    def observe(self, state):
        theta, omega = state.physics
        return np.array([np.cos(theta), np.sin(theta), omega])

    def _advance(self, physics, action):
        theta, omega = physics
        torque = MAX_TORQUE * float(action[0])
        reward = -float(pendulum_cost(theta, omega, torque))
        omega_next = np.clip(omega + DT * (_ANGULAR * np.sin(theta) + _TORQUE_GAIN * torque), -MAX_SPEED, MAX_SPEED)
        theta_next = wrap_angle(theta + DT * omega_next)
        return np.array([theta_next, omega_next]), reward

    def true_rollout_grad(self, state, actions):
        actions = np.asarray(actions, dtype=np.float64).reshape(-1, 1)
        if len(actions) < 1:
            raise ValueError("need at least one action")
        repeat = self.spec.action_repeat

        # Forward: record every sub-step
        tape = []
        theta, omega = state.physics
        for a in np.clip(actions[:, 0], -1.0, 1.0):
            torque = MAX_TORQUE * a
            for _ in range(repeat):
                omega_pre = omega + DT * (_ANGULAR * np.sin(theta) + _TORQUE_GAIN * torque)
                tape.append((theta, omega, torque, omega_pre))
                omega = np.clip(omega_pre, -MAX_SPEED, MAX_SPEED)
                theta = theta + DT * omega

        # Reverse
        grads = np.zeros(len(actions))
        g_theta = g_omega = 0.0
        for idx in range(len(tape) - 1, -1, -1):
            theta, omega, torque, omega_pre = tape[idx]
            g_omega_post = g_omega + DT * g_theta
            g_pre = g_omega_post if abs(omega_pre) < MAX_SPEED else 0.0
            g_torque = g_pre * DT * _TORQUE_GAIN - 0.002 * torque
            g_theta = g_theta + g_pre * DT * _ANGULAR * np.cos(theta) - 2.0 * wrap_angle(theta)
            g_omega = g_pre - 0.2 * omega
            grads[idx // repeat] += MAX_TORQUE * g_torque
        return grads.reshape(-1, 1)
