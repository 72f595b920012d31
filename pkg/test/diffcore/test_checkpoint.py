"""
Tests for the binary stack checkpoint format.
"""

import numpy as np
import pytest

from dreammpc.diffcore.checkpoint import decode_stacks, encode_stacks, load_stacks, save_stacks
from dreammpc.diffcore.dense import DenseStack, PostOp
from dreammpc.errors import CheckpointFormatError


@pytest.fixture
def stacks(rng):
    return [
        DenseStack.initialize([3, 8, 4], [PostOp.LAYERNORM_MISH, PostOp.SIMNORM], rng, simnorm_dim=4),
        DenseStack.initialize([2, 1], [PostOp.TANH], rng),
    ]


class TestCheckpoint:
    """Checkpoint encoding and validation"""

    def test_save_and_load_restore_parameters(self, tmp_path, stacks):
        """Saved stacks come back bit-identical together with their metadata."""
        path = str(tmp_path / "model.dmpc")
        save_stacks(path, stacks, b"meta")
        payload = load_stacks(path)
        assert payload.metadata == b"meta"
        assert len(payload.stacks) == 2
        for original, layers in zip(stacks, payload.stacks, strict=True):
            for a, b in zip(original.layers, layers, strict=True):
                np.testing.assert_array_equal(a.weight, b.weight)
                np.testing.assert_array_equal(a.bias, b.bias)
                assert a.post_op is b.post_op

    def test_truncated_file_rejected(self, stacks):
        """Cutting bytes off the end is detected."""
        data = encode_stacks(stacks)
        with pytest.raises(CheckpointFormatError, match="truncated"):
            decode_stacks(data[:-3])

    def test_bad_magic_rejected(self, stacks):
        """Files without the magic prefix are rejected."""
        data = encode_stacks(stacks)
        with pytest.raises(CheckpointFormatError, match="magic"):
            decode_stacks(b"XXXX" + data[4:])

    def test_trailing_bytes_rejected(self, stacks):
        """Extra bytes after the last stack are rejected."""
        with pytest.raises(CheckpointFormatError, match="trailing"):
            decode_stacks(encode_stacks(stacks) + b"\0")

    def test_missing_file(self, tmp_path):
        """An unreadable path raises CheckpointFormatError."""
        with pytest.raises(CheckpointFormatError):
            load_stacks(str(tmp_path / "absent.dmpc"))
