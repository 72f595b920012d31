"""Training loop, evaluation and replay."""

from dreammpc.agent.episode import EpisodeResult, StepRecord, run_episode
from dreammpc.agent.evaluation import evaluate, evaluate_checkpoint
from dreammpc.agent.replay_buffer import ReplayBuffer
from dreammpc.agent.scores import normalized_score
from dreammpc.agent.trainer import TrainResult, train

__all__ = [
    "EpisodeResult",
    "ReplayBuffer",
    "StepRecord",
    "TrainResult",
    "evaluate",
    "evaluate_checkpoint",
    "normalized_score",
    "run_episode",
    "train",
]
