"""Latent world model and its training updates."""

from dreammpc.worldmodel.training import (
    RunningScale,
    SequenceBatch,
    TrainingState,
    model_update,
    policy_update,
)
from dreammpc.worldmodel.world_model import (
    EvalCounter,
    WorldModel,
    ensemble_uncertainty,
    load_world_model,
    save_world_model,
)

__all__ = [
    "EvalCounter",
    "RunningScale",
    "SequenceBatch",
    "TrainingState",
    "WorldModel",
    "ensemble_uncertainty",
    "load_world_model",
    "model_update",
    "policy_update",
    "save_world_model",
]
