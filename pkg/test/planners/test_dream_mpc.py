"""
Tests for candidate generation, action reuse and the gradient planner.
"""

import numpy as np
import pytest

from dreammpc.errors import DimensionMismatchError
from dreammpc.model.models import PlannerConfig, PlannerKind, ProposalKind
from dreammpc.planners.candidates import (
    ReusePlan,
    gaussian_candidates,
    init_with_reuse,
    rollout_policy_candidates,
)
from dreammpc.planners.dream_mpc import dream_mpc_plan, grad_ascent_step
from dreammpc.planners.registry import build_planner
from dreammpc.worldmodel.world_model import EvalCounter
from test.helpers import QuadraticModel


class AlternatingModel(QuadraticModel):
    """Candidates alternate between +0.5 and -0.5; Q is spread only for positive actions.

    Both actions have the same ensemble mean Q (1.0) but population std 10 and 0.
    """

    def __init__(self):
        super().__init__(latent_dim=2, action_dim=1, offsets=(0.0, 0.0), gamma=0.9)

    def q_values_at(self, z, a):
        spread = np.where(a[..., :1] > 0.0, 10.0, 0.0)
        return 1.0 + spread * np.array([1.0, -1.0])

    def policy_sample(self, z, rng, deterministic=False, counter=None):
        z = np.asarray(z)
        if z.ndim == 1:
            return np.array([0.5]), 0.0
        signs = np.where(np.arange(len(z)) % 2 == 0, 0.5, -0.5)
        if counter is not None:
            counter.policy_evals += len(z)
        return signs[:, None], np.zeros(len(z))


class NaNRewardModel(QuadraticModel):
    def reward_forward(self, z, a, counter=None):
        r, tape = super().reward_forward(z, a, counter)
        return np.full_like(r, np.nan), tape


def deterministic_config(**overrides):
    values = dict(stochastic_candidates=False, perturb_std=0.0, iterations=0, num_candidates=2)
    values.update(overrides)
    return PlannerConfig(**values)


class TestCandidates:
    """Candidate proposals"""

    def test_policy_rollout_shapes_and_counts(self, small_model, rng):
        """N*H dynamics and N*(H+1) policy evaluations."""
        counter = EvalCounter()
        z = small_model.encode(rng.normal(size=3))
        config = PlannerConfig(num_candidates=5, horizon=3)
        candidates = rollout_policy_candidates(small_model, z, config, rng, counter)
        assert candidates.actions.shape == (5, 4, 1)
        assert candidates.latents.shape == (5, 4, 16)
        assert counter.dynamics_evals == 15
        assert counter.policy_evals == 20

    def test_deterministic_without_noise_repeats(self, small_model, rng):
        """Deterministic candidates without perturbation are identical."""
        z = small_model.encode(rng.normal(size=3))
        config = PlannerConfig(stochastic_candidates=False, perturb_std=0.0)
        actions = rollout_policy_candidates(small_model, z, config, rng).actions
        np.testing.assert_array_equal(actions, np.broadcast_to(actions[0], actions.shape))

    def test_deterministic_perturbs_one_greedy_rollout(self, small_model, rng):
        """Perturbed candidates are the greedy sequence plus one draw of clipped noise."""
        z = small_model.encode(rng.normal(size=3))
        greedy = rollout_policy_candidates(
            small_model, z, PlannerConfig(stochastic_candidates=False, perturb_std=0.0), rng
        )
        config = PlannerConfig(stochastic_candidates=False, perturb_std=0.3, num_candidates=5)
        counter = EvalCounter()
        perturbed = rollout_policy_candidates(small_model, z, config, np.random.default_rng(11), counter)
        noise = 0.3 * np.random.default_rng(11).standard_normal((5, 4, 1))
        np.testing.assert_array_equal(perturbed.actions, np.clip(greedy.actions + noise, -1.0, 1.0))
        np.testing.assert_array_equal(perturbed.latents, greedy.latents)
        assert counter.dynamics_evals == 15

    def test_gaussian_candidates_clipped(self, rng):
        """Gaussian proposals lie in [-1, 1]."""
        config = PlannerConfig(proposal=ProposalKind.GAUSSIAN, proposal_std=5.0, num_candidates=64)
        actions = gaussian_candidates(config, 2, rng).actions
        assert actions.shape == (64, 4, 2)
        assert np.abs(actions).max() <= 1.0


class TestReuse:
    """Action reuse between steps"""

    def test_shift_repeats_last_action(self):
        """The shifted plan drops the first action and repeats the last."""
        actions = np.arange(6, dtype=float).reshape(1, 3, 2) / 10.0
        shifted = ReusePlan.from_optimized(actions).shifted
        np.testing.assert_allclose(shifted[0], [[0.2, 0.3], [0.4, 0.5], [0.4, 0.5]])

    def test_mix(self):
        """a = rho * shifted + (1 - rho) * proposal."""
        reuse = ReusePlan(np.full((2, 3, 1), 1.0))
        mixed = init_with_reuse(np.zeros((2, 3, 1)), reuse, 0.1)
        np.testing.assert_allclose(mixed, 0.1)

    def test_empty_plan_uses_proposal(self):
        """The first step of an episode takes the proposal unchanged."""
        proposal = np.full((2, 3, 1), 0.7)
        np.testing.assert_array_equal(init_with_reuse(proposal, ReusePlan.empty(), 0.5), proposal)

    def test_rho_bounds(self):
        """rho = 0 ignores the plan; rho = 1 copies it."""
        reuse = ReusePlan(np.full((1, 2, 1), -0.3))
        proposal = np.full((1, 2, 1), 0.6)
        np.testing.assert_allclose(init_with_reuse(proposal, reuse, 0.0), proposal)
        np.testing.assert_allclose(init_with_reuse(proposal, reuse, 1.0), reuse.shifted)

    def test_shape_mismatch(self):
        """A plan from a different candidate count is rejected."""
        with pytest.raises(DimensionMismatchError):
            init_with_reuse(np.zeros((3, 2, 1)), ReusePlan(np.zeros((2, 2, 1))), 0.5)


class TestGradAscentStep:
    """Single gradient-ascent step"""

    def test_closed_form_step(self):
        """On the quadratic model a' = clip(a + alpha * dJ/da)."""
        model = QuadraticModel(gamma=0.5)
        actions = np.array([[0.8], [-0.6], [0.4]])
        updated, value = grad_ascent_step(model, actions, np.zeros(2), 0.5, 0.0, 0.1)
        grads = np.array([[-1.6], [0.6], [-0.2]])
        np.testing.assert_allclose(updated, actions + 0.1 * grads)
        assert value == pytest.approx(-0.64 - 0.5 * 0.36 + 0.25 * -0.16)

    def test_clipped_to_bounds(self):
        """Large steps are clipped to [-1, 1]."""
        model = QuadraticModel(gamma=1.0)
        updated, _ = grad_ascent_step(model, np.array([[0.9], [-0.9]]), np.zeros(2), 1.0, 0.0, 10.0)
        np.testing.assert_allclose(updated, [[-1.0], [1.0]])

    def test_requires_single_sequence(self):
        """grad_ascent_step takes one (H+1, A) sequence."""
        with pytest.raises(DimensionMismatchError):
            grad_ascent_step(QuadraticModel(), np.zeros((1, 3, 1)), np.zeros(2), 0.9, 0.0, 0.1)


class TestDreamMPCPlan:
    """Full planning step"""

    def test_default_evaluation_counts(self, small_model, rng):
        """Defaults (N=5, H=3, I=1) spend 15 dynamics evaluations in each phase."""
        z = small_model.encode(rng.normal(size=3))
        _, _, diagnostics = dream_mpc_plan(small_model, z, PlannerConfig(), ReusePlan.empty(), rng)
        assert diagnostics.optimization_dynamics_evals == 15
        assert diagnostics.candidate_dynamics_evals == 15
        assert diagnostics.rescoring_dynamics_evals == 15
        assert diagnostics.total_dynamics_evals == 45
        assert len(diagnostics.initial_objectives) == 5

    def test_gaussian_proposal_needs_no_rollouts(self, small_model, rng):
        """Gaussian candidates spend nothing on candidate generation."""
        z = small_model.encode(rng.normal(size=3))
        config = PlannerConfig(proposal=ProposalKind.GAUSSIAN, num_candidates=8, iterations=2)
        _, _, diagnostics = dream_mpc_plan(small_model, z, config, ReusePlan.empty(), rng)
        assert diagnostics.candidate_dynamics_evals == 0
        assert diagnostics.optimization_dynamics_evals == 8 * 2 * 3

    def test_reuse_plan_returned(self, small_model, rng):
        """The returned plan holds every optimized candidate, shifted."""
        z = small_model.encode(rng.normal(size=3))
        action, reuse, diagnostics = dream_mpc_plan(small_model, z, PlannerConfig(), ReusePlan.empty(), rng)
        assert reuse.shifted.shape == (5, 4, 1)
        assert np.abs(action).max() <= 1.0
        assert diagnostics.chosen_objective == max(diagnostics.final_objectives)

    def test_ascent_improves_quadratic_objective(self):
        """Gradient steps raise the objective on a concave model."""
        model = QuadraticModel(policy_action=0.9, gamma=0.9)
        config = deterministic_config(iterations=3, step_size=0.2, num_candidates=1)
        _, _, diagnostics = dream_mpc_plan(model, np.zeros(2), config, ReusePlan.empty(), np.random.default_rng(0))
        assert diagnostics.final_objectives[0] > diagnostics.initial_objectives[0]

    def test_uncertainty_penalty_picks_low_std(self):
        """Equal mean Q: the penalty picks the std-0 candidate; without it index 0 wins."""
        model = AlternatingModel()
        z = np.zeros(2)
        rng = np.random.default_rng(0)
        penalised = deterministic_config(uncertainty_coef=0.01)
        plain = deterministic_config(uncertainty_coef=0.0)
        action, _, diag = dream_mpc_plan(model, z, penalised, ReusePlan.empty(), rng)
        assert diag.chosen_index == 1
        np.testing.assert_allclose(action, [-0.5])
        action, _, diag = dream_mpc_plan(model, z, plain, ReusePlan.empty(), rng)
        assert diag.final_objectives[0] == diag.final_objectives[1]
        assert diag.chosen_index == 0
        np.testing.assert_allclose(action, [0.5])

    def test_all_non_finite_falls_back_to_policy(self):
        """With every candidate non-finite the deterministic policy action is used."""
        model = NaNRewardModel(policy_action=0.3)
        action, reuse, diagnostics = dream_mpc_plan(
            model, np.zeros(2), PlannerConfig(), ReusePlan.empty(), np.random.default_rng(0)
        )
        assert diagnostics.fallback
        assert reuse.is_empty
        assert diagnostics.nonfinite_candidates == 5
        np.testing.assert_allclose(action, [0.3])


class RowProposalModel(QuadraticModel):
    """The deterministic policy proposes ``proposals[n]`` for candidate row n."""

    def __init__(self, proposals):
        super().__init__(gamma=0.9)
        self.proposals = np.asarray(proposals, dtype=float)

    def policy_sample(self, z, rng, deterministic=False, counter=None):
        z = np.asarray(z)
        if z.ndim == 1:
            return np.array([self.proposals[0]]), 0.0
        if counter is not None:
            counter.policy_evals += len(z)
        return self.proposals[: len(z), None], np.zeros(len(z))


class TestReuseAcrossSteps:
    """Warm start carried from one planning step to the next"""

    def test_next_plan_is_previous_plan_shifted(self):
        """With I = 0 and rho = 1 the next plan is the optimized plan shifted, last action repeated."""
        model = QuadraticModel(policy_action=0.9, gamma=0.9)
        rng = np.random.default_rng(3)
        z = np.zeros(2)
        first = deterministic_config(num_candidates=3, perturb_std=0.2, iterations=2, step_size=0.2)
        _, reuse, _ = dream_mpc_plan(model, z, first, ReusePlan.empty(), rng)
        assert not np.allclose(reuse.shifted[:, 0], reuse.shifted[:, -1])

        replay = deterministic_config(num_candidates=3, perturb_std=0.2, iterations=0, reuse_coef=1.0)
        action, next_reuse, diagnostics = dream_mpc_plan(model, z, replay, reuse, rng)
        np.testing.assert_array_equal(action, reuse.shifted[diagnostics.chosen_index, 0])
        np.testing.assert_array_equal(next_reuse.shifted, ReusePlan.from_optimized(reuse.shifted).shifted)
        assert diagnostics.optimization_dynamics_evals == 0

    def test_planner_object_carries_plan(self):
        """The stateful planner's next plan is the carried sequence of the chosen candidate."""
        model = QuadraticModel(policy_action=0.9, gamma=0.9)
        config = deterministic_config(num_candidates=3, perturb_std=0.2, iterations=2, step_size=0.2)
        planner = build_planner(PlannerKind.DREAM_MPC, model, config)
        rng = np.random.default_rng(5)
        planner.act(np.zeros(2), rng, True)
        carried = planner.reuse.shifted.copy()
        planner.config = config.model_copy(update={"iterations": 0, "reuse_coef": 1.0})
        _, diagnostics = planner.act(np.zeros(2), rng, True)
        np.testing.assert_array_equal(planner.last_plan, carried[diagnostics.chosen_index])


class TestArgmaxSelection:
    """Choice of the executed candidate"""

    @pytest.mark.parametrize("seed", range(5))
    def test_permutation_invariant(self, seed):
        """Reordering distinct candidates picks the same sequence."""
        proposals = np.array([0.8, -0.35, 0.6, 0.15, -0.9, 0.5])
        perm = np.random.default_rng(seed).permutation(len(proposals))
        config = deterministic_config(num_candidates=6, iterations=1, step_size=0.1)
        z = np.zeros(2)
        action, _, diag = dream_mpc_plan(RowProposalModel(proposals), z, config, ReusePlan.empty(), None)
        permuted, _, pdiag = dream_mpc_plan(
            RowProposalModel(proposals[perm]), z, config, ReusePlan.empty(), None
        )
        np.testing.assert_array_equal(action, permuted)
        assert perm[pdiag.chosen_index] == diag.chosen_index
        assert diag.chosen_index == 3

    def test_exact_ties_resolve_to_lower_index(self):
        """Tied objectives pick the first tied candidate in either order."""
        config = deterministic_config(num_candidates=3, iterations=0)
        z = np.zeros(2)
        action, _, diag = dream_mpc_plan(RowProposalModel([0.7, 0.2, -0.2]), z, config, ReusePlan.empty(), None)
        swapped, _, sdiag = dream_mpc_plan(RowProposalModel([0.7, -0.2, 0.2]), z, config, ReusePlan.empty(), None)
        assert diag.chosen_index == sdiag.chosen_index == 1
        np.testing.assert_array_equal(action, [0.2])
        np.testing.assert_array_equal(swapped, [-0.2])
