"""
Pytest configuration and shared fixtures for dreammpc tests.

Training-scale tests carry the ``slow`` marker and end-to-end runs the
``integration`` marker; select with ``-m "not slow"``.
"""

import os

import numpy as np
import pytest

from test.helpers import make_small_model

TINY_CONFIG = """
[run]
name = tiny
seed = 3

[env]
name = pendulum_swingup
episode_length = 6

[model]
latent_dim = 16
simnorm_dim = 4
hidden_dim = 16
encoder_dim = 16
num_q = 3

[planner]
num_candidates = 4
horizon = 2

[mppi]
population = 16
policy_samples = 4
elites = 4
iterations = 2

[train]
total_steps = 14
seed_steps = 6
batch_size = 4
train_horizon = 2
buffer_capacity = 100
eval_interval = 0

[eval]
episodes = 2
"""


@pytest.fixture
def rng():
    """A fixed-seed generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    """A small pendulum-sized world model with random reward and Q heads."""
    return make_small_model(seed=0)


@pytest.fixture
def fresh_model():
    """A small world model straight from initialisation (reward and Q are zero)."""
    return make_small_model(seed=0, random_heads=False)


@pytest.fixture
def tiny_config_file(tmp_path):
    """A config file for seconds-long end-to-end runs."""
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return str(path)


@pytest.fixture
def runs_dir(tmp_path):
    """Temporary root for run directories."""
    path = tmp_path / "runs"
    path.mkdir()
    return str(path)


@pytest.fixture(autouse=True)
def clean_dmpc_environment(monkeypatch):
    """Keep DMPC_* variables of the calling shell out of the tests."""
    for key in list(os.environ):
        if key.startswith("DMPC_"):
            monkeypatch.delenv(key, raising=False)
