"""Analytic continuous-control tasks."""

from dreammpc.envs.base import Environment, EnvSpec, EnvState, StepResult, wrap_angle
from dreammpc.envs.cartpole import CartpoleSwingup
from dreammpc.envs.pendulum import PendulumSwingup
from dreammpc.envs.registry import env_from_config, make_env

__all__ = [
    "CartpoleSwingup",
    "EnvSpec",
    "EnvState",
    "Environment",
    "PendulumSwingup",
    "StepResult",
    "env_from_config",
    "make_env",
    "wrap_angle",
]
