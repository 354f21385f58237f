"""Rank-4 tensors with reverse-mode automatic differentiation.

Every value flowing through the network is a :class:`Tensor` holding a dense
``(n, c, h, w)`` array.  Operations on tensors that require gradients record a
:class:`GraphNode` whose backward closure consumes the output gradient and
accumulates into the inputs.  Tensors without a node are constants and are
never mutated by the graph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import ShapeError

Dims = Tuple[int, int, int, int]
BackwardFn = Callable[[np.ndarray], None]

_FLOAT_TYPES = (np.float32, np.float64)


@dataclass(eq=False)
class GraphNode:
    op: str
    inputs: Tuple["Tensor", ...]
    backward: BackwardFn


class Tensor:
    """Dense rank-4 real array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False, node: GraphNode | None = None) -> None:
        array = np.asarray(data)
        if array.ndim != 4:
            raise ShapeError(f"tensor: expected rank 4 (n, c, h, w), got rank {array.ndim}")
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"tensor: every axis must be positive, got {array.shape}")
        if array.dtype.type not in _FLOAT_TYPES:
            array = array.astype(np.float32)
        self.data = np.ascontiguousarray(array)
        self.grad: np.ndarray | None = None
        self.node = node
        self.requires_grad = requires_grad or node is not None

    @property
    def dims(self) -> Dims:
        n, c, h, w = self.data.shape
        return int(n), int(c), int(h), int(w)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"tensor: item() needs a single element, got dims {self.dims}")
        return float(self.data.reshape(-1)[0])

    def astype(self, dtype) -> "Tensor":
        """Detached copy at another precision, keeping ``requires_grad``."""

        return Tensor(self.data.astype(dtype, copy=True), requires_grad=self.requires_grad)

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate gradients from this tensor to every leaf that requires them."""

        if not self.requires_grad:
            raise ShapeError("tensor: backward() called on a tensor that does not require gradients")
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"tensor: implicit backward needs a scalar, got dims {self.dims}")
            grad = np.ones_like(self.data)
        self.accumulate(grad)
        for tensor in reversed(_topological_order(self)):
            if tensor.node is not None and tensor.grad is not None:
                tensor.node.backward(tensor.grad)

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited: set[int] = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in tensor.node.inputs:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))
    return order


def record(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap ``data`` as an op output, attaching a node only when gradients are needed."""

    if any(t.requires_grad for t in inputs):
        return Tensor(data, node=GraphNode(op, tuple(inputs), backward))
    return Tensor(data)


def feed(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor.accumulate(grad)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0
    out = np.where(positive, x.data, 0).astype(x.dtype, copy=False)

    def backward(grad: np.ndarray) -> None:
        feed(x, grad * positive)

    return record("relu", out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows; the clip keeps values strictly inside (0, 1)
    info = np.finfo(x.dtype)
    out = np.clip(0.5 * (1.0 + np.tanh(0.5 * x.data)), info.tiny, 1.0 - info.epsneg).astype(x.dtype, copy=False)

    def backward(grad: np.ndarray) -> None:
        feed(x, grad * out * (1.0 - out))

    return record("sigmoid", out, (x,), backward)


def concat(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate along the channel axis, keeping argument order."""

    if not xs:
        raise ShapeError("concat: needs at least one tensor")
    n, _, h, w = xs[0].dims
    for idx, t in enumerate(xs[1:], start=1):
        tn, _, th, tw = t.dims
        if (tn, th, tw) != (n, h, w):
            axis = "batch" if tn != n else ("height" if th != h else "width")
            raise ShapeError(f"concat: {axis} axis of input {idx} is {t.dims}, expected (n,h,w)=({n},{h},{w})")
    out = np.concatenate([t.data for t in xs], axis=1)
    bounds = np.cumsum([0] + [t.dims[1] for t in xs])

    def backward(grad: np.ndarray) -> None:
        for t, start, stop in zip(xs, bounds[:-1], bounds[1:]):
            feed(t, grad[:, start:stop])

    return record("concat", out, xs, backward)


def add_broadcast(a: Tensor, b: Tensor) -> Tensor:
    """``a + b`` where ``b`` matches ``a`` or has a single channel."""

    an, ac, ah, aw = a.dims
    bn, bc, bh, bw = b.dims
    if (an, ah, aw) != (bn, bh, bw) or bc not in (ac, 1):
        raise ShapeError(f"add_broadcast: cannot add dims {b.dims} onto {a.dims}")
    out = a.data + b.data
    squeeze = bc != ac

    def backward(grad: np.ndarray) -> None:
        feed(a, grad)
        feed(b, grad.sum(axis=1, keepdims=True) if squeeze else grad)

    return record("add_broadcast", out, (a, b), backward)


def add(*xs: Tensor) -> Tensor:
    if not xs:
        raise ShapeError("add: needs at least one tensor")
    for t in xs[1:]:
        if t.dims != xs[0].dims:
            raise ShapeError(f"add: dims {t.dims} differ from {xs[0].dims}")
    out = xs[0].data.copy()
    for t in xs[1:]:
        out = out + t.data

    def backward(grad: np.ndarray) -> None:
        for t in xs:
            feed(t, grad)

    return record("add", out, xs, backward)


def scale(x: Tensor, factor: float) -> Tensor:
    out = x.data * factor

    def backward(grad: np.ndarray) -> None:
        feed(x, grad * factor)

    return record("scale", out, (x,), backward)


def total(x: Tensor) -> Tensor:
    """Sum of every entry as a ``(1, 1, 1, 1)`` scalar tensor."""

    out = x.data.sum(dtype=x.dtype).reshape(1, 1, 1, 1)

    def backward(grad: np.ndarray) -> None:
        feed(x, np.broadcast_to(grad.reshape(()), x.data.shape))

    return record("sum", out, (x,), backward)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """``sum(x * weights)`` with a constant weight array of the same dims."""

    if weights.shape != x.data.shape:
        raise ShapeError(f"weighted_sum: weights {weights.shape} do not match {x.dims}")
    weights = weights.astype(x.dtype, copy=False)
    out = np.asarray((x.data * weights).sum(dtype=x.dtype)).reshape(1, 1, 1, 1)

    def backward(grad: np.ndarray) -> None:
        feed(x, grad.reshape(()) * weights)

    return record("weighted_sum", out, (x,), backward)


def channel(x: Tensor, index: int) -> Tensor:
    """Select one channel, keeping the channel axis."""

    c = x.dims[1]
    if not 0 <= index < c:
        raise ShapeError(f"channel: index {index} out of range for {c} channels")
    out = x.data[:, index : index + 1].copy()

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[:, index : index + 1] = grad
        feed(x, full)

    return record("channel", out, (x,), backward)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; the subgradient goes to the first argmax."""

    n, c, h, w = x.dims
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2: spatial dims ({h}, {w}) must be even")
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    winner = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, winner, axis=-1)[..., 0]

    def backward(grad: np.ndarray) -> None:
        routed = np.zeros_like(blocks)
        np.put_along_axis(routed, winner, grad[..., None], axis=-1)
        routed = routed.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        feed(x, routed)

    return record("maxpool2", out, (x,), backward)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _require_two_channels(op: str, x: Tensor) -> None:
    if x.dims[1] != 2:
        raise ShapeError(f"{op}: expected 2 channels, got {x.dims[1]}")


def softmax_channels(x: Tensor) -> Tensor:
    _require_two_channels("softmax_channels", x)
    probs = _softmax(x.data)

    def backward(grad: np.ndarray) -> None:
        feed(x, probs * (grad - (grad * probs).sum(axis=1, keepdims=True)))

    return record("softmax_channels", probs, (x,), backward)


def log_softmax_channels(x: Tensor) -> Tensor:
    _require_two_channels("log_softmax_channels", x)
    peak = x.data.max(axis=1, keepdims=True)
    shifted = x.data - peak
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(out)

    def backward(grad: np.ndarray) -> None:
        feed(x, grad - probs * grad.sum(axis=1, keepdims=True))

    return record("log_softmax_channels", out, (x,), backward)


def _bilinear_matrix(size_in: int, size_out: int) -> np.ndarray:
    matrix = np.zeros((size_out, size_in), dtype=np.float64)
    src = (np.arange(size_out) + 0.5) * (size_in / size_out) - 0.5
    src = np.clip(src, 0, size_in - 1)
    low = np.floor(src).astype(int)
    high = np.minimum(low + 1, size_in - 1)
    frac = src - low
    rows = np.arange(size_out)
    np.add.at(matrix, (rows, low), 1.0 - frac)
    np.add.at(matrix, (rows, high), frac)
    return matrix


def resize_array(array: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize (half-pixel centres) over the last two axes."""

    in_h, in_w = array.shape[-2:]
    if (in_h, in_w) == (height, width):
        return array.copy()
    rows = _bilinear_matrix(in_h, height)
    cols = _bilinear_matrix(in_w, width)
    out = np.einsum("ij,...jk,lk->...il", rows, array.astype(np.float64), cols)
    return out.astype(array.dtype if array.dtype.type in _FLOAT_TYPES else np.float32)


def resize_nearest(array: np.ndarray, height: int, width: int) -> np.ndarray:
    in_h, in_w = array.shape[-2:]
    rows = np.minimum(((np.arange(height) + 0.5) * (in_h / height)).astype(int), in_h - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * (in_w / width)).astype(int), in_w - 1)
    return array[..., rows[:, None], cols[None, :]]


def resize_bilinear(x: Tensor, height: int, width: int) -> Tensor:
    """Resize a tensor for preprocessing; the result is a constant (no graph)."""

    if height <= 0 or width <= 0:
        raise ShapeError(f"resize_bilinear: target size ({height}, {width}) must be positive")
    return Tensor(resize_array(x.data, height, width))


__all__ = [
    "Tensor",
    "GraphNode",
    "record",
    "feed",
    "relu",
    "sigmoid",
    "concat",
    "add_broadcast",
    "add",
    "scale",
    "total",
    "weighted_sum",
    "channel",
    "maxpool2",
    "softmax_channels",
    "log_softmax_channels",
    "resize_array",
    "resize_nearest",
    "resize_bilinear",
]
