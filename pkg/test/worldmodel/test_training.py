"""
Tests for the joint model update, the policy update and the running Q scale.
"""

import numpy as np
import pytest

from dreammpc.errors import DimensionMismatchError
from dreammpc.model.models import TrainConfig
from dreammpc.worldmodel.training import (
    RunningScale,
    SequenceBatch,
    TrainingState,
    model_update,
    policy_update,
)
from dreammpc.worldmodel.world_model import LatentGradients, WorldModel
from test.helpers import make_small_model


def make_batch(rng, batch=4, horizon=3, obs_dim=3, action_dim=1):
    return SequenceBatch(
        observations=rng.normal(size=(batch, horizon + 1, obs_dim)),
        actions=rng.uniform(-1, 1, size=(batch, horizon, action_dim)),
        rewards=rng.normal(size=(batch, horizon)),
    )


class _Tape:
    def __init__(self, z, a, target):
        self.z, self.a, self.target = z, a, target

    def backward(self, dq, *, with_params=False):
        da = -2.0 * (self.a - self.target) * dq.sum(axis=-1, keepdims=True)
        return LatentGradients(dz=np.zeros_like(self.z), da=da)


class PeakedQModel(WorldModel):
    """Every Q member equals -(a - target)^2."""

    target = 0.5

    def q_forward(self, z, a, counter=None, *, use_target=False, dropout_rng=None):
        q = -np.sum((a - self.target) ** 2, axis=-1, keepdims=True)
        return np.repeat(q, self.num_q, axis=-1), _Tape(z, a, self.target)


class TestSequenceBatch:
    """Training batch validation"""

    def test_shapes(self, rng):
        """batch_size and horizon come from the reward array."""
        batch = make_batch(rng, batch=5, horizon=2)
        assert (batch.batch_size, batch.horizon) == (5, 2)

    def test_inconsistent_shapes_rejected(self, rng):
        """Observations must have one more step than actions."""
        with pytest.raises(DimensionMismatchError):
            SequenceBatch(
                observations=np.zeros((2, 3, 3)), actions=np.zeros((2, 3, 1)), rewards=np.zeros((2, 3))
            )


class TestRunningScale:
    """Percentile span of Q"""

    def test_starts_at_one(self):
        """The initial scale is 1."""
        assert RunningScale().value == 1.0

    def test_lerps_toward_span(self):
        """value <- 0.99 * value + 0.01 * max(p95 - p5, 1)."""
        scale = RunningScale()
        q = np.linspace(0.0, 100.0, 101)
        assert scale.update(q) == pytest.approx(0.99 + 0.01 * 90.0)

    def test_span_floored_at_one(self):
        """A near-constant batch contributes a span of 1."""
        scale = RunningScale()
        assert scale.update(np.full(10, 3.0)) == pytest.approx(1.0)


class TestModelUpdate:
    """Joint encoder, dynamics, reward and Q update"""

    def test_applied_update_moves_parameters(self, small_model, rng):
        """A finite update changes the encoder and reward parameters and counts itself."""
        state = TrainingState.create(small_model)
        enc_before = small_model.encoder.layers[0].weight.copy()
        rew_before = small_model.reward.layers[-1].weight.copy()
        report = model_update(small_model, make_batch(rng), state, TrainConfig(), rng)
        assert report.applied
        assert np.isfinite([report.consistency, report.reward, report.value, report.total]).all()
        assert report.total == pytest.approx(20.0 * report.consistency + 0.1 * report.reward + 0.1 * report.value)
        assert state.updates == 1
        assert not np.array_equal(enc_before, small_model.encoder.layers[0].weight)
        assert not np.array_equal(rew_before, small_model.reward.layers[-1].weight)

    def test_targets_follow_online_slowly(self, small_model, rng):
        """After one update the targets sit 1% of the way to the online weights."""
        before = small_model.q_targets[0].layers[0].weight.copy()
        model_update(small_model, make_batch(rng), TrainingState.create(small_model), TrainConfig(), rng)
        online = small_model.q_ensemble[0].layers[0].weight
        np.testing.assert_allclose(
            small_model.q_targets[0].layers[0].weight, 0.99 * before + 0.01 * online
        )

    def test_non_finite_batch_skipped(self, small_model, rng):
        """A NaN observation skips the update and leaves every parameter untouched."""
        batch = make_batch(rng)
        batch.observations[0, 0, 0] = np.nan
        before = [p.copy() for s in small_model.stacks() for p in s.parameters()]
        state = TrainingState.create(small_model)
        report = model_update(small_model, batch, state, TrainConfig(), rng)
        assert not report.applied
        assert state.updates == 0
        after = [p for s in small_model.stacks() for p in s.parameters()]
        for a, b in zip(before, after, strict=True):
            np.testing.assert_array_equal(a, b)

    def test_reward_loss_decreases(self, rng):
        """Repeated updates on one batch reduce the reward loss."""
        model = make_small_model(seed=2)
        batch = make_batch(rng)
        state = TrainingState.create(model)
        config = TrainConfig(learning_rate=3e-3, encoder_learning_rate=1e-3)
        first = model_update(model, batch, state, config, rng).reward
        for _ in range(60):
            last = model_update(model, batch, state, config, rng).reward
        assert last < first


class TestPolicyUpdate:
    """Policy prior update"""

    def test_only_policy_moves(self, small_model, rng):
        """The policy update changes no world-model parameters."""
        z = small_model.encode(rng.normal(size=(8, 3)))
        others = [p.copy() for s in small_model.stacks() if s is not small_model.policy for p in s.parameters()]
        report = policy_update(small_model, z, TrainingState.create(small_model), TrainConfig(), rng)
        assert report.applied
        after = [p for s in small_model.stacks() if s is not small_model.policy for p in s.parameters()]
        for a, b in zip(others, after, strict=True):
            np.testing.assert_array_equal(a, b)

    def test_policy_climbs_quadratic_q(self):
        """Under Q = -(a - 0.5)^2 the deterministic action moves to 0.5."""
        rng = np.random.default_rng(0)
        base = make_small_model(seed=3)
        model = PeakedQModel(
            base.obs_dim, base.action_dim, base.config, base.encoder, base.dynamics,
            base.reward, base.q_ensemble, base.q_targets, base.policy,
        )
        z = model.encode(rng.normal(size=(32, 3)))
        state = TrainingState.create(model)
        config = TrainConfig(learning_rate=1e-2)
        start = np.abs(model.policy_sample(z, None, True)[0] - 0.5).mean()
        for _ in range(300):
            policy_update(model, z, state, config, rng)
        end = np.abs(model.policy_sample(z, None, True)[0] - 0.5).mean()
        assert end < start
        assert end < 0.1


class _NaNGradTape:
    def __init__(self, z, a):
        self.z, self.a = z, a

    def backward(self, dq, *, with_params=False):
        return LatentGradients(dz=np.zeros_like(self.z), da=np.full_like(self.a, np.nan))


class NaNGradQModel(WorldModel):
    """Finite, widely spread Q values whose action gradient is NaN."""

    def q_forward(self, z, a, counter=None, *, use_target=False, dropout_rng=None):
        spread = 100.0 * np.arange(len(z), dtype=float)[:, None]
        return np.repeat(spread, self.num_q, axis=-1), _NaNGradTape(z, a)


def rebuild(cls, base):
    return cls(
        base.obs_dim, base.action_dim, base.config, base.encoder, base.dynamics,
        base.reward, base.q_ensemble, base.q_targets, base.policy,
    )


class TestModelUpdateLoss:
    """Reported losses against a direct computation"""

    @pytest.mark.parametrize("temporal_coef", [0.5, 1.0])
    def test_loss_matches_direct_computation(self, temporal_coef):
        """Per-step losses weighted by lambda^t and combined with the 20 / 0.1 / 0.1 coefficients."""
        model = make_small_model(seed=4)
        batch = make_batch(np.random.default_rng(9), batch=2, horizon=3)
        config = TrainConfig(temporal_coef=temporal_coef)

        # Same draws as the update: one TD target per step, in step order
        td_rng = np.random.default_rng(21)
        z = model.encode(batch.observations[:, 0])
        consistency = reward = value = 0.0
        for t in range(3):
            a = batch.actions[:, t]
            w = temporal_coef**t
            z_target = model.encode(batch.observations[:, t + 1])
            td = model.td_target(batch.rewards[:, t], z_target, td_rng)
            reward += w * np.mean((model.predict_reward(z, a) - batch.rewards[:, t]) ** 2)
            value += w * np.mean((model.q_values(z, a) - np.asarray(td)[:, None]) ** 2)
            z = model.dynamics_step(z, a)
            consistency += w * np.mean((z - z_target) ** 2)

        report = model_update(model, batch, TrainingState.create(model), config, np.random.default_rng(21))
        assert report.applied
        assert report.consistency == pytest.approx(consistency, rel=1e-10)
        assert report.reward == pytest.approx(reward, rel=1e-10)
        assert report.value == pytest.approx(value, rel=1e-10)
        assert report.total == pytest.approx(20.0 * consistency + 0.1 * reward + 0.1 * value, rel=1e-10)

    def test_geometric_weighting_of_equal_step_losses(self):
        """Equal unit per-step losses with lambda = 0.5 over three steps sum to 1.75."""
        model = make_small_model(seed=0, random_heads=False)
        rewards = np.ones((1, 3))
        batch = SequenceBatch(
            observations=np.zeros((1, 4, 3)), actions=np.zeros((1, 3, 1)), rewards=rewards
        )
        # Fresh heads predict 0 for reward, so each step's reward error is exactly 1
        report = model_update(model, batch, TrainingState.create(model), TrainConfig(temporal_coef=0.5), np.random.default_rng(0))
        assert report.reward == pytest.approx(1.75, rel=1e-10)


class TestPolicyUpdateSkips:
    """Skipped policy updates"""

    def test_skipped_update_keeps_scale(self):
        """A non-finite policy gradient leaves the running Q scale and the policy untouched."""
        rng = np.random.default_rng(0)
        model = rebuild(NaNGradQModel, make_small_model(seed=3))
        z = model.encode(rng.normal(size=(16, 3)))
        state = TrainingState.create(model)
        before = [p.copy() for p in model.policy.parameters()]
        report = policy_update(model, z, state, TrainConfig(), rng)
        assert not report.applied
        assert report.scale > 1.0
        assert state.scale.value == 1.0
        for a, b in zip(before, model.policy.parameters(), strict=True):
            np.testing.assert_array_equal(a, b)

    def test_applied_update_commits_scale(self, small_model, rng):
        """An applied update stores the proposed scale."""
        z = small_model.encode(rng.normal(size=(8, 3)))
        state = TrainingState.create(small_model)
        report = policy_update(small_model, z, state, TrainConfig(), rng)
        assert report.applied
        assert state.scale.value == report.scale
