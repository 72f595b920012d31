"""Minimal differentiable compute layer: dense stacks, tapes, Adam, checkpoints."""

from dreammpc.diffcore.dense import (
    DenseLayer,
    DenseStack,
    GradTape,
    PostOp,
    backward_input,
    backward_params,
    dense_forward,
    simnorm,
)
from dreammpc.diffcore.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "DenseLayer",
    "DenseStack",
    "GradTape",
    "PostOp",
    "adam_step",
    "backward_input",
    "backward_params",
    "dense_forward",
    "simnorm",
]
