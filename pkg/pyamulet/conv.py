"""Regular and transposed 2-D convolution over rank-4 tensors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConvSpecError, ShapeError
from .tensor import Tensor, feed, record


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: Tuple[int, int] = (3, 3)
    stride: int = 1
    padding: int = 0
    transposed: bool = False

    def __post_init__(self) -> None:
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ConvSpecError(f"conv2d: channel counts must be positive, got {self.in_channels}->{self.out_channels}")
        if len(self.kernel) != 2 or min(self.kernel) <= 0:
            raise ConvSpecError(f"conv2d: kernel must be two positive sizes, got {self.kernel}")
        if self.stride <= 0:
            raise ConvSpecError(f"conv2d: stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ConvSpecError(f"conv2d: padding must be non-negative, got {self.padding}")

    @classmethod
    def same(cls, in_channels: int, out_channels: int, kernel: int) -> "ConvSpec":
        """Stride-1 convolution that preserves spatial size (odd kernels)."""

        return cls(in_channels, out_channels, (kernel, kernel), 1, kernel // 2)

    @classmethod
    def upsample(cls, in_channels: int, out_channels: int, factor: int) -> "ConvSpec":
        """Transposed convolution mapping ``h`` to ``factor * h`` exactly."""

        if factor < 2 or factor % 2:
            raise ConvSpecError(f"conv2d: upsampling factor must be even and >= 2, got {factor}")
        return cls(in_channels, out_channels, (2 * factor, 2 * factor), factor, factor // 2, True)

    @property
    def weight_dims(self) -> Tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel[0], self.kernel[1])

    def output_hw(self, height: int, width: int) -> Tuple[int, int]:
        return self._output_size(height, self.kernel[0], "height"), self._output_size(width, self.kernel[1], "width")

    def _output_size(self, size: int, kernel: int, axis: str) -> int:
        if self.transposed:
            out = (size - 1) * self.stride - 2 * self.padding + kernel
        else:
            span = size + 2 * self.padding - kernel
            if span < 0 or span % self.stride:
                raise ConvSpecError(
                    f"conv2d: {axis} {size} with kernel {kernel}, padding {self.padding}, "
                    f"stride {self.stride} gives a non-integral output size"
                )
            out = span // self.stride + 1
        if out <= 0:
            raise ConvSpecError(f"conv2d: {axis} output size {out} is not positive")
        return out


def _pad(array: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return array
    return np.pad(array, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """View of shape (n, c, oh, ow, kh, kw) over the strided kernel positions."""

    return sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def _col2im(col: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Scatter-add (n, h, w, c, kh, kw) patches onto a (n, c, (h-1)s+kh, (w-1)s+kw) grid."""

    n, h, w, c = col.shape[:4]
    bh, bw = -(-kh // stride), -(-kw // stride)
    col = np.pad(col, ((0, 0),) * 4 + ((0, bh * stride - kh), (0, bw * stride - kw)))
    full = np.zeros((n, c, (h + bh - 1) * stride, (w + bw - 1) * stride), dtype=col.dtype)
    span_h, span_w = h * stride, w * stride
    for a in range(bh):
        for b in range(bw):
            block = col[..., a * stride : (a + 1) * stride, b * stride : (b + 1) * stride]
            block = block.transpose(0, 3, 1, 4, 2, 5).reshape(n, c, span_h, span_w)
            full[:, :, a * stride : a * stride + span_h, b * stride : b * stride + span_w] += block
    return full[:, :, : (h - 1) * stride + kh, : (w - 1) * stride + kw]


def _check_operands(x: Tensor, weight: Tensor, bias: Tensor | None, spec: ConvSpec) -> None:
    if x.dims[1] != spec.in_channels:
        raise ShapeError(f"conv2d: channel axis of input is {x.dims[1]}, spec expects {spec.in_channels}")
    for axis, (got, want) in zip(("out_channels", "in_channels", "kernel_h", "kernel_w"), zip(weight.dims, spec.weight_dims)):
        if got != want:
            raise ShapeError(f"conv2d: weight {axis} axis is {got}, spec expects {want}")
    if bias is not None and bias.dims != (1, spec.out_channels, 1, 1):
        raise ShapeError(f"conv2d: bias dims {bias.dims}, expected (1, {spec.out_channels}, 1, 1)")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, spec: ConvSpec) -> Tensor:
    """Cross-correlation with zero padding, or its transpose when ``spec.transposed``.

    ``weight`` always has dims ``(out_c, in_c, kh, kw)``.
    """

    _check_operands(x, weight, bias, spec)
    n, _, h, w = x.dims
    oh, ow = spec.output_hw(h, w)
    kh, kw = spec.kernel
    s, p = spec.stride, spec.padding
    dtype = np.result_type(x.dtype, weight.dtype)
    xd = x.data.astype(dtype, copy=False)
    wd = weight.data.astype(dtype, copy=False)

    if spec.transposed:
        col = np.tensordot(xd, wd, axes=([1], [1]))
        out = _col2im(col, kh, kw, s)[:, :, p : p + oh, p : p + ow]
    else:
        padded = _pad(xd, p)
        windows = _windows(padded, kh, kw, s)
        out = np.tensordot(windows, wd, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out = out + bias.data.astype(dtype, copy=False)

    def backward(grad: np.ndarray) -> None:
        if bias is not None:
            feed(bias, grad.sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1))
        if spec.transposed:
            gwin = _windows(_pad(grad, p), kh, kw, s)
            feed(x, np.tensordot(gwin, wd, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2))
            feed(weight, np.tensordot(gwin, xd, axes=([0, 2, 3], [0, 2, 3])).transpose(0, 3, 1, 2))
        else:
            feed(weight, np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3])))
            if x.requires_grad:
                col = np.tensordot(grad, wd, axes=([1], [0]))
                full = _col2im(col, kh, kw, s)
                grad_padded = np.zeros(padded.shape, dtype=dtype)
                grad_padded[:, :, : full.shape[2], : full.shape[3]] = full
                feed(x, grad_padded[:, :, p : p + h, p : p + w])

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("conv_transpose2d" if spec.transposed else "conv2d", out, inputs, backward)


__all__ = ["ConvSpec", "conv2d"]
