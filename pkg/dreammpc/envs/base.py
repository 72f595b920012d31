"""Environment interface shared by the analytic control tasks."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from dreammpc.errors import DimensionMismatchError, NonFiniteError


@dataclass(frozen=True)
class EnvSpec:
    """Static description of a task. Actions live in [-1, 1]."""

    name: str
    obs_dim: int
    action_dim: int
    episode_length: int
    action_repeat: int
    reward_description: str
    state_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.action_dim < 1 or self.obs_dim < 1:
            raise ValueError("obs_dim and action_dim must be positive")
        if self.episode_length < 1 or self.action_repeat < 1:
            raise ValueError("episode_length and action_repeat must be positive")


@dataclass
class EnvState:
    """Physical coordinates (angles unencoded) plus the decision-step index."""

    physics: np.ndarray
    step: int
    episode_length: int

    def copy(self) -> "EnvState":
        return EnvState(self.physics.copy(), self.step, self.episode_length)


class StepResult(NamedTuple):
    state: EnvState
    observation: np.ndarray
    reward: float
    done: bool


def wrap_angle(theta):
    """Map angles onto [-pi, pi)."""
    return np.mod(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi


class Environment(ABC):
    """A single-owner, deterministic state machine. ``step`` never mutates its input."""

    spec: EnvSpec

    @abstractmethod
    def reset(self, rng: np.random.Generator) -> tuple[EnvState, np.ndarray]:
        """Initial state and observation."""

    @abstractmethod
    def observe(self, state: EnvState) -> np.ndarray:
        """Observation vector for ``state``."""

    @abstractmethod
    def _advance(self, physics: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, float]:
        """One physics sub-step; returns (next physics, reward at the pre-update state)."""

    def step(self, state: EnvState, action: np.ndarray) -> StepResult:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.spec.action_dim,):
            raise DimensionMismatchError(
                f"action has shape {action.shape}, expected ({self.spec.action_dim},)"
            )
        if not np.isfinite(action).all():
            raise NonFiniteError("environment received a non-finite action")
        action = np.clip(action, -1.0, 1.0)
        physics = state.physics
        total = 0.0
        for _ in range(self.spec.action_repeat):
            physics, reward = self._advance(physics, action)
            total += reward
        nxt = EnvState(physics, state.step + 1, state.episode_length)
        return StepResult(nxt, self.observe(nxt), float(total), nxt.step >= nxt.episode_length)

    def true_rollout_grad(self, state: EnvState, actions: np.ndarray) -> np.ndarray:
        """Gradient of the summed true reward over ``actions`` (H, A) w.r.t. the actions."""
        raise NotImplementedError(f"{self.spec.name} has no analytic rollout gradient")

    def trajectory_columns(self) -> list[str]:
        state_cols = list(self.spec.state_labels)
        action_cols = [f"action_{i}" for i in range(self.spec.action_dim)]
        return ["episode", "step", *state_cols, *action_cols, "reward"]
