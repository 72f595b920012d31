"""
Tests for Adam updates and global-norm clipping.
"""

import numpy as np
import pytest

from dreammpc.diffcore.optim import AdamState, adam_step, clip_by_global_norm, global_norm
from dreammpc.errors import DimensionMismatchError


class TestClipping:
    """Global-norm clipping"""

    def test_norm_40_clipped_to_20_halves_gradient(self):
        """A gradient of norm 40 with clip norm 20 is scaled by one half."""
        grads = [np.array([24.0, 0.0]), np.array([[32.0]])]
        clipped, norm = clip_by_global_norm(grads, 20.0)
        assert norm == pytest.approx(40.0)
        np.testing.assert_allclose(clipped[0], [12.0, 0.0])
        np.testing.assert_allclose(clipped[1], [[16.0]])
        assert global_norm(clipped) == pytest.approx(20.0)

    def test_small_gradient_untouched(self):
        """Gradients already within the bound are returned as is."""
        grads = [np.array([3.0, 4.0])]
        clipped, norm = clip_by_global_norm(grads, 20.0)
        assert norm == pytest.approx(5.0)
        assert clipped[0] is grads[0]


class TestAdam:
    """Adaptive-moment updates"""

    def test_first_step_moves_by_learning_rate(self):
        """The bias-corrected first step has magnitude lr per coordinate."""
        params = [np.array([1.0, -2.0])]
        state = AdamState.zeros_like(params)
        adam_step(params, [np.array([0.5, -3.0])], state, lr=0.1)
        np.testing.assert_allclose(params[0], [0.9, -1.9], atol=1e-6)
        assert state.step == 1

    def test_minimises_quadratic(self):
        """Repeated steps drive a convex quadratic toward its minimum."""
        params = [np.array([5.0, -3.0])]
        state = AdamState.zeros_like(params)
        for _ in range(500):
            adam_step(params, [2.0 * params[0]], state, lr=0.05)
        assert np.linalg.norm(params[0]) < 0.05

    def test_non_positive_learning_rate_rejected(self):
        """Learning rates must be positive."""
        params = [np.zeros(2)]
        with pytest.raises(ValueError):
            adam_step(params, [np.zeros(2)], AdamState.zeros_like(params), lr=0.0)

    def test_shape_mismatch_rejected(self):
        """Gradient shapes must match parameter shapes."""
        params = [np.zeros(2)]
        with pytest.raises(DimensionMismatchError):
            adam_step(params, [np.zeros(3)], AdamState.zeros_like(params), lr=0.1)
