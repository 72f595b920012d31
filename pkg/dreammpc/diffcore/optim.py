"""Adaptive-moment parameter updates with global-norm gradient clipping."""

from dataclasses import dataclass

import numpy as np

from dreammpc.config.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from dreammpc.errors import DimensionMismatchError


@dataclass
class AdamState:
    """First and second moment estimates, one array per parameter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def global_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(
    grads: list[np.ndarray], max_norm: float | None
) -> tuple[list[np.ndarray], float]:
    """Rescale ``grads`` so their joint norm is at most ``max_norm``; returns the raw norm."""
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    eps: float = ADAM_EPS,
    *,
    clip_norm: float | None = None,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place.

    Gradients are clipped to ``clip_norm`` (global norm) before the moment update.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionMismatchError("params, grads and moment state differ in length")
    for p, g, m in zip(params, grads, state.m, strict=True):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionMismatchError(
                f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}"
            )

    grads, _ = clip_by_global_norm(grads, clip_norm)
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v, strict=True):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params, state
