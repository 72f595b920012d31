"""Policy-only action selection (no planning)."""

import numpy as np

from dreammpc.worldmodel.world_model import EvalCounter


def policy_only_act(
    model,
    z_t: np.ndarray,
    deterministic: bool,
    rng: np.random.Generator | None = None,
    counter: EvalCounter | None = None,
) -> np.ndarray:
    """One policy evaluation: tanh(mean) when deterministic, a squashed sample otherwise."""
    action, _ = model.policy_sample(z_t, None if deterministic else rng, deterministic, counter)
    return np.asarray(action, dtype=np.float64)
