"""Dense layer stacks with tape-based reverse-mode gradients.

A forward pass returns the output together with a ``GradTape`` holding the primal
values needed to replay the backward pass once. Inputs may be a single vector of
shape ``(in,)`` or a batch of shape ``(B, in)``; parameter gradients are summed over
the batch.

Parameters must not be modified between a forward pass and the replay of its tape.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit, softmax

from dreammpc.config.constants import LAYERNORM_EPS, SIMNORM_DIM
from dreammpc.errors import DimensionMismatchError, NonFiniteError, TapeConsumedError


class PostOp(str, Enum):
    """Operation applied after the affine map of a layer."""

    LINEAR = "linear"
    LAYERNORM_MISH = "layernorm_mish"
    SIMNORM = "simnorm"
    TANH = "tanh"


# Stable on-disk tags, see diffcore.checkpoint
POST_OP_TAGS: dict[PostOp, int] = {
    PostOp.LINEAR: 0,
    PostOp.LAYERNORM_MISH: 1,
    PostOp.SIMNORM: 2,
    PostOp.TANH: 3,
}
TAG_TO_POST_OP: dict[int, PostOp] = {tag: op for op, tag in POST_OP_TAGS.items()}


def softplus(x: np.ndarray) -> np.ndarray:
    """Overflow-safe log(1 + exp(x))."""
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def mish(x: np.ndarray) -> np.ndarray:
    return x * np.tanh(softplus(x))


def _mish_derivative(x: np.ndarray) -> np.ndarray:
    t = np.tanh(softplus(x))
    return t + x * (1.0 - t * t) * expit(x)


def simnorm(x: np.ndarray, group_size: int) -> np.ndarray:
    """Softmax within consecutive groups of ``group_size`` entries along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if group_size <= 0 or x.shape[-1] % group_size != 0:
        raise DimensionMismatchError(
            f"length {x.shape[-1]} is not divisible by group size {group_size}"
        )
    groups = x.reshape(*x.shape[:-1], -1, group_size)
    return softmax(groups, axis=-1).reshape(x.shape)


def layer_norm(x: np.ndarray, eps: float = LAYERNORM_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Normalise the last axis with population variance; returns (normed, 1/std)."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, inv_std


@dataclass
class DenseLayer:
    """Affine map followed by a post-op. ``weight`` has shape (out, in)."""

    weight: np.ndarray
    bias: np.ndarray
    post_op: PostOp = PostOp.LINEAR
    dropout: float = 0.0

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.post_op = PostOp(self.post_op)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionMismatchError(
                f"weight {self.weight.shape} and bias {self.bias.shape} do not form a layer"
            )
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class _LayerRecord:
    x: np.ndarray
    out: np.ndarray
    normed: np.ndarray | None = None
    inv_std: np.ndarray | None = None
    mask: np.ndarray | None = None


@dataclass
class TapeGradients:
    """Gradients produced by one tape replay."""

    dx: np.ndarray
    params: list[np.ndarray] | None = field(default=None)


class GradTape:
    """Primal values of one forward pass; replayable exactly once."""

    def __init__(self, stack: "DenseStack", records: list[_LayerRecord], squeeze: bool):
        self._stack = stack
        self._records = records
        self._squeeze = squeeze
        self._consumed = False

    @property
    def consumed(self) -> bool:
        return self._consumed

    @property
    def output_dim(self) -> int:
        return self._stack.output_dim

    def backward(self, dy: np.ndarray, *, with_params: bool = True) -> TapeGradients:
        """Propagate ``dy`` (gradient w.r.t. the output) back to the input and parameters."""
        if self._consumed:
            raise TapeConsumedError("backward was already invoked on this tape")
        dy = np.asarray(dy, dtype=np.float64)
        batch = self._records[0].x.shape[0]
        if self._squeeze:
            if dy.shape != (self._stack.output_dim,):
                raise DimensionMismatchError(
                    f"dy has shape {dy.shape}, expected ({self._stack.output_dim},)"
                )
            g = dy[None, :]
        else:
            if dy.shape != (batch, self._stack.output_dim):
                raise DimensionMismatchError(
                    f"dy has shape {dy.shape}, expected ({batch}, {self._stack.output_dim})"
                )
            g = dy
        self._consumed = True

        layers = self._stack.layers
        grads: list[np.ndarray] | None = [None] * (2 * len(layers)) if with_params else None
        for idx in range(len(layers) - 1, -1, -1):
            layer = layers[idx]
            rec = self._records[idx]
            if layer.post_op is PostOp.LINEAR:
                dpre = g
            elif layer.post_op is PostOp.TANH:
                dpre = g * (1.0 - rec.out * rec.out)
            elif layer.post_op is PostOp.SIMNORM:
                v = self._stack.simnorm_dim
                y = rec.out.reshape(batch, -1, v)
                gg = g.reshape(batch, -1, v)
                dpre = (y * (gg - (gg * y).sum(axis=-1, keepdims=True))).reshape(g.shape)
            else:
                n = rec.normed
                dn = g * _mish_derivative(n)
                dpre = rec.inv_std * (
                    dn
                    - dn.mean(axis=-1, keepdims=True)
                    - n * (dn * n).mean(axis=-1, keepdims=True)
                )
            if rec.mask is not None:
                dpre = dpre * rec.mask
            if grads is not None:
                grads[2 * idx] = dpre.T @ rec.x
                grads[2 * idx + 1] = dpre.sum(axis=0)
            g = dpre @ layer.weight

        dx = g[0] if self._squeeze else g
        return TapeGradients(dx=dx, params=grads)


class DenseStack:
    """Ordered dense layers; houses the parameterisation of every learned component."""

    def __init__(self, layers: list[DenseLayer], simnorm_dim: int = SIMNORM_DIM, name: str = ""):
        if not layers:
            raise DimensionMismatchError("a stack needs at least one layer")
        for prev, nxt in zip(layers, layers[1:], strict=False):
            if prev.out_dim != nxt.in_dim:
                raise DimensionMismatchError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        for layer in layers:
            if not (np.isfinite(layer.weight).all() and np.isfinite(layer.bias).all()):
                raise NonFiniteError(f"stack '{name}' has non-finite parameters")
            if layer.post_op is PostOp.SIMNORM and layer.out_dim % simnorm_dim != 0:
                raise DimensionMismatchError(
                    f"SimNorm layer width {layer.out_dim} not divisible by {simnorm_dim}"
                )
        self.layers = layers
        self.simnorm_dim = simnorm_dim
        self.name = name

    @classmethod
    def initialize(
        cls,
        dims: list[int],
        post_ops: list[PostOp],
        rng: np.random.Generator,
        *,
        simnorm_dim: int = SIMNORM_DIM,
        first_dropout: float = 0.0,
        zero_last: bool = False,
        name: str = "",
    ) -> "DenseStack":
        """Build a stack with LeCun-normal weights and zero biases.

        ``dims`` lists layer widths including the input width.
        """
        if len(dims) != len(post_ops) + 1:
            raise DimensionMismatchError("need exactly one post-op per layer")
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:], strict=True)):
            last = k == len(post_ops) - 1
            if last and zero_last:
                weight = np.zeros((fan_out, fan_in))
            else:
                weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in))
            layers.append(
                DenseLayer(
                    weight=weight,
                    bias=np.zeros(fan_out),
                    post_op=post_ops[k],
                    dropout=first_dropout if k == 0 else 0.0,
                )
            )
        return cls(layers, simnorm_dim=simnorm_dim, name=name)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in (W0, b0, W1, b1, ...) order; shared, not copied."""
        params = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    def copy(self, name: str | None = None) -> "DenseStack":
        layers = [
            DenseLayer(layer.weight.copy(), layer.bias.copy(), layer.post_op, layer.dropout)
            for layer in self.layers
        ]
        return DenseStack(layers, simnorm_dim=self.simnorm_dim, name=name or self.name)

    def forward(
        self, x: np.ndarray, *, dropout_rng: np.random.Generator | None = None
    ) -> tuple[np.ndarray, GradTape]:
        """Evaluate the stack. Dropout is active only when ``dropout_rng`` is given."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"stack '{self.name}' expects input width {self.input_dim}, got shape {x.shape}"
            )
        if not np.isfinite(h).all():
            raise NonFiniteError(f"stack '{self.name}' received a non-finite input")

        records = []
        for layer in self.layers:
            pre = h @ layer.weight.T + layer.bias
            mask = None
            if dropout_rng is not None and layer.dropout > 0.0:
                keep = 1.0 - layer.dropout
                mask = (dropout_rng.random(pre.shape) < keep) / keep
                pre = pre * mask
            normed = inv_std = None
            if layer.post_op is PostOp.LINEAR:
                out = pre
            elif layer.post_op is PostOp.TANH:
                out = np.tanh(pre)
            elif layer.post_op is PostOp.SIMNORM:
                out = simnorm(pre, self.simnorm_dim)
            else:
                normed, inv_std = layer_norm(pre)
                out = mish(normed)
            records.append(_LayerRecord(x=h, out=out, normed=normed, inv_std=inv_std, mask=mask))
            h = out

        y = h[0] if squeeze else h
        return y, GradTape(self, records, squeeze)


def dense_forward(
    stack: DenseStack, x: np.ndarray, *, dropout_rng: np.random.Generator | None = None
) -> tuple[np.ndarray, GradTape]:
    """Forward evaluation returning (y, tape)."""
    return stack.forward(x, dropout_rng=dropout_rng)


def backward_input(tape: GradTape, dy: np.ndarray) -> np.ndarray:
    """Gradient of <dy, y> with respect to the taped input. Consumes the tape."""
    return tape.backward(dy, with_params=False).dx


def backward_params(tape: GradTape, dy: np.ndarray) -> list[np.ndarray]:
    """Gradients of <dy, y> with respect to the stack parameters. Consumes the tape."""
    return tape.backward(dy, with_params=True).params
