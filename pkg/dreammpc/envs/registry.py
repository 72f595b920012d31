"""Environment construction by name."""

from dreammpc.envs.base import Environment
from dreammpc.envs.cartpole import CartpoleSwingup
from dreammpc.envs.pendulum import PendulumSwingup
from dreammpc.model.models import EnvConfig, EnvName


def make_env(name: EnvName | str, action_repeat: int, episode_length: int | None = None) -> Environment:
    name = EnvName(name)
    if name is EnvName.PENDULUM_SWINGUP:
        return PendulumSwingup(action_repeat, episode_length)
    if name is EnvName.CARTPOLE_SWINGUP:
        return CartpoleSwingup(action_repeat, episode_length)
    return CartpoleSwingup(action_repeat, episode_length, sparse=True)


def env_from_config(config: EnvConfig) -> Environment:
    return make_env(config.name, config.action_repeat, config.episode_length)
