"""Batch normalization over the (n, h, w) axes of each channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .models import Mode
from .tensor import Tensor, feed, record

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9


@dataclass
class BatchNormState:
    """Running statistics; updated in place by train-mode calls."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPSILON

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=np.float32), np.ones(channels, dtype=np.float32))

    @property
    def channels(self) -> int:
        return int(self.running_mean.shape[0])

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.running_mean.copy(), self.running_var.copy(), self.momentum, self.eps)


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, mode: Mode = Mode.TRAIN) -> Tensor:
    n, c, h, w = x.dims
    for name, param in (("gamma", gamma), ("beta", beta)):
        if param.dims != (1, c, 1, 1):
            raise ShapeError(f"batchnorm: {name} dims {param.dims}, expected (1, {c}, 1, 1)")
    if state.channels != c:
        raise ShapeError(f"batchnorm: running statistics track {state.channels} channels, input has {c}")

    axes = (0, 2, 3)
    count = n * h * w
    if Mode(mode) is Mode.TRAIN:
        if count < 2:
            raise ShapeError(f"batchnorm: train mode needs >= 2 elements per channel, got {count}")
        mean = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        keep = state.momentum
        state.running_mean[...] = keep * state.running_mean + (1.0 - keep) * mean.reshape(c)
        state.running_var[...] = keep * state.running_var + (1.0 - keep) * var.reshape(c) * (count / (count - 1))
    else:
        mean = state.running_mean.reshape(1, c, 1, 1).astype(x.dtype)
        var = state.running_var.reshape(1, c, 1, 1).astype(x.dtype)

    inv_std = 1.0 / np.sqrt(var + state.eps)
    normalized = (x.data - mean) * inv_std
    out = gamma.data * normalized + beta.data
    training = Mode(mode) is Mode.TRAIN

    def backward(grad: np.ndarray) -> None:
        feed(gamma, (grad * normalized).sum(axis=axes, keepdims=True))
        feed(beta, grad.sum(axis=axes, keepdims=True))
        if not x.requires_grad:
            return
        grad_norm = grad * gamma.data
        if training:
            grad_x = inv_std / count * (
                count * grad_norm
                - grad_norm.sum(axis=axes, keepdims=True)
                - normalized * (grad_norm * normalized).sum(axis=axes, keepdims=True)
            )
        else:
            grad_x = grad_norm * inv_std
        feed(x, grad_x)

    return record("batchnorm", out, (x, gamma, beta), backward)


__all__ = ["BN_EPSILON", "BN_MOMENTUM", "BatchNormState", "batchnorm"]
