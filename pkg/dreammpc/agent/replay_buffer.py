"""Ring-buffer replay with episode-aware sequence sampling."""

import numpy as np

from dreammpc.errors import DimensionMismatchError
from dreammpc.worldmodel.training import SequenceBatch


class ReplayBuffer:
    """Stores transitions (s, a, r, s', episode) and samples contiguous sub-sequences.

    A sampled sequence of H transitions never spans two episodes; start indices are
    drawn uniformly from all valid ones.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self._obs = np.zeros((capacity, obs_dim))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._episodes = np.full(capacity, -1, dtype=np.int64)
        self._total = 0

    def __len__(self) -> int:
        return min(self._total, self.capacity)

    @property
    def total_added(self) -> int:
        return self._total

    def add(self, obs, action, reward: float, next_obs, episode: int) -> None:
        obs = np.asarray(obs, dtype=np.float64)
        next_obs = np.asarray(next_obs, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if obs.shape != (self.obs_dim,) or next_obs.shape != (self.obs_dim,):
            raise DimensionMismatchError(f"observation shape {obs.shape} != ({self.obs_dim},)")
        if action.shape != (self.action_dim,):
            raise DimensionMismatchError(f"action shape {action.shape} != ({self.action_dim},)")
        i = self._total % self.capacity
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._episodes[i] = episode
        self._total += 1

    def valid_starts(self, horizon: int) -> np.ndarray:
        """Logical positions p such that transitions p..p+H-1 belong to one episode."""
        first = max(0, self._total - self.capacity)
        last_start = self._total - horizon
        if last_start < first:
            return np.zeros(0, dtype=np.int64)
        starts = np.arange(first, last_start + 1)
        ends = starts + horizon - 1
        same = self._episodes[starts % self.capacity] == self._episodes[ends % self.capacity]
        return starts[same]

    def sample(self, batch_size: int, horizon: int, rng: np.random.Generator) -> SequenceBatch:
        starts = self.valid_starts(horizon)
        if starts.size == 0:
            raise ValueError(f"no stored sequence of {horizon} transitions within one episode")
        chosen = starts[rng.integers(0, starts.size, size=batch_size)]
        idx = (chosen[:, None] + np.arange(horizon)[None, :]) % self.capacity
        observations = np.concatenate(
            [self._obs[idx], self._next_obs[idx[:, -1]][:, None, :]], axis=1
        )
        return SequenceBatch(
            observations=observations, actions=self._actions[idx], rewards=self._rewards[idx]
        )
