"""Binary checkpoint format for dense stacks.

Layout (little-endian)::

    magic "DMPC" | version u32 | metadata length u32 | metadata bytes
    stack count u32
    per stack:  layer count u32
      per layer: rows u32 | cols u32 | post-op tag u8
                 | rows*cols f64 weights (row-major) | rows f64 biases

The metadata block is opaque to this module; the world model stores its header there.
"""

import struct
from dataclasses import dataclass

import numpy as np

from dreammpc.config.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from dreammpc.diffcore.dense import POST_OP_TAGS, TAG_TO_POST_OP, DenseLayer, DenseStack
from dreammpc.errors import CheckpointFormatError
from dreammpc.utils.file_operations import write_bytes_atomically

_U32 = struct.Struct("<I")
_LAYER_HEADER = struct.Struct("<IIB")
_F64 = np.dtype("<f8")


@dataclass
class CheckpointPayload:
    """Decoded checkpoint: opaque metadata plus one layer list per stack."""

    metadata: bytes
    stacks: list[list[DenseLayer]]


def encode_stacks(stacks: list[DenseStack], metadata: bytes = b"") -> bytes:
    parts = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_FORMAT_VERSION)]
    parts.append(_U32.pack(len(metadata)))
    parts.append(metadata)
    parts.append(_U32.pack(len(stacks)))
    for stack in stacks:
        parts.append(_U32.pack(len(stack.layers)))
        for layer in stack.layers:
            rows, cols = layer.weight.shape
            parts.append(_LAYER_HEADER.pack(rows, cols, POST_OP_TAGS[layer.post_op]))
            parts.append(np.ascontiguousarray(layer.weight, dtype=_F64).tobytes(order="C"))
            parts.append(np.ascontiguousarray(layer.bias, dtype=_F64).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CheckpointFormatError("checkpoint is truncated")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(_U32.size))[0]

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count * _F64.itemsize), dtype=_F64).astype(np.float64)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def decode_stacks(data: bytes) -> CheckpointPayload:
    reader = _Reader(data)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("not a dreammpc checkpoint (bad magic)")
    version = reader.u32()
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    metadata = reader.take(reader.u32())
    stacks = []
    for _ in range(reader.u32()):
        layers = []
        for _ in range(reader.u32()):
            rows, cols, tag = _LAYER_HEADER.unpack(reader.take(_LAYER_HEADER.size))
            if tag not in TAG_TO_POST_OP:
                raise CheckpointFormatError(f"unknown post-op tag {tag}")
            weight = reader.f64(rows * cols).reshape(rows, cols)
            bias = reader.f64(rows)
            layers.append(DenseLayer(weight, bias, TAG_TO_POST_OP[tag]))
        stacks.append(layers)
    if not reader.exhausted:
        raise CheckpointFormatError("trailing bytes after last stack")
    return CheckpointPayload(metadata=metadata, stacks=stacks)


def save_stacks(path: str, stacks: list[DenseStack], metadata: bytes = b"") -> None:
    write_bytes_atomically(path, encode_stacks(stacks, metadata))


def load_stacks(path: str) -> CheckpointPayload:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint: {path}: {e}") from e
    return decode_stacks(data)
