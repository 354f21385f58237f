"""Deterministic synthetic salient-shape dataset.

Each sample is drawn from its own :class:`~pyamulet.util.rng.Xoshiro256`
stream derived from ``(spec.seed, index)``, so samples can be generated in
any order or in parallel.  Shapes live on the integer pixel grid and their
supports are evaluated with exact integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from ..models import ImageSample, ShapeKind, SynthSpec
from ..util.rng import Xoshiro256
from .netpbm import quantize


def _grid(h: int, w: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.arange(h, dtype=np.int64)[:, None], np.arange(w, dtype=np.int64)[None, :]


@dataclass(frozen=True)
class Ellipse:
    cy: int
    cx: int
    ry: int
    rx: int

    def support(self, h: int, w: int) -> np.ndarray:
        yy, xx = _grid(h, w)
        ry2, rx2 = self.ry * self.ry, self.rx * self.rx
        return (yy - self.cy) ** 2 * rx2 + (xx - self.cx) ** 2 * ry2 <= rx2 * ry2

    def rot90(self, h: int, w: int) -> "Ellipse":
        return Ellipse(w - 1 - self.cx, self.cy, self.rx, self.ry)

    def mirror(self, w: int) -> "Ellipse":
        return Ellipse(self.cy, w - 1 - self.cx, self.ry, self.rx)


@dataclass(frozen=True)
class Rectangle:
    top: int
    left: int
    height: int
    width: int

    def support(self, h: int, w: int) -> np.ndarray:
        mask = np.zeros((h, w), dtype=bool)
        mask[max(0, self.top) : max(0, self.top + self.height), max(0, self.left) : max(0, self.left + self.width)] = True
        return mask

    def rot90(self, h: int, w: int) -> "Rectangle":
        return Rectangle(w - self.left - self.width, self.top, self.width, self.height)

    def mirror(self, w: int) -> "Rectangle":
        return Rectangle(self.top, w - self.left - self.width, self.height, self.width)


@dataclass(frozen=True)
class Triangle:
    vertices: Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]

    def support(self, h: int, w: int) -> np.ndarray:
        (y0, x0), (y1, x1), (y2, x2) = self.vertices
        if (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0) < 0:
            (y1, x1), (y2, x2) = (y2, x2), (y1, x1)
        yy, xx = _grid(h, w)
        inside = np.ones((h, w), dtype=bool)
        # inclusive edge functions: boundary pixels belong to the shape
        for (ay, ax), (by, bx) in (((y0, x0), (y1, x1)), ((y1, x1), (y2, x2)), ((y2, x2), (y0, x0))):
            inside &= (bx - ax) * (yy - ay) - (by - ay) * (xx - ax) >= 0
        return inside

    def rot90(self, h: int, w: int) -> "Triangle":
        return Triangle(tuple((w - 1 - x, y) for y, x in self.vertices))

    def mirror(self, w: int) -> "Triangle":
        return Triangle(tuple((y, w - 1 - x) for y, x in self.vertices))


Shape = Union[Ellipse, Rectangle, Triangle]


def rasterize(shapes: List[Shape], h: int, w: int) -> np.ndarray:
    """Union of shape supports as a boolean (h, w) mask."""

    mask = np.zeros((h, w), dtype=bool)
    for shape in shapes:
        mask |= shape.support(h, w)
    return mask


def _extent(spec: SynthSpec, rng: Xoshiro256, size: int) -> int:
    low, high = spec.size_fraction
    extent = int(round(rng.uniform(low, high) * size))
    return max(3, min(extent, size - 2 * spec.margin))


def _placement(spec: SynthSpec, rng: Xoshiro256, size: int, extent: int, edge: str | None) -> int:
    if edge == "start":
        return 0
    if edge == "end":
        return size - extent
    return rng.integers(spec.margin, size - spec.margin - extent)


def _bounding_box(spec: SynthSpec, rng: Xoshiro256) -> Tuple[int, int, int, int]:
    h, w = spec.image_hw
    bh, bw = _extent(spec, rng, h), _extent(spec, rng, w)
    vertical = horizontal = None
    if spec.touch_boundary:
        side = rng.integers(0, 3)
        if side < 2:
            vertical = "start" if side == 0 else "end"
        else:
            horizontal = "start" if side == 2 else "end"
    top = _placement(spec, rng, h, bh, vertical)
    left = _placement(spec, rng, w, bw, horizontal)
    return top, left, bh, bw


def sample_shape(spec: SynthSpec, rng: Xoshiro256) -> Shape:
    kind = rng.choice(spec.kinds)
    top, left, bh, bw = _bounding_box(spec, rng)
    if kind is ShapeKind.ELLIPSE:
        ry, rx = (bh - 1) // 2, (bw - 1) // 2
        return Ellipse(top + ry, left + rx, ry, rx)
    if kind is ShapeKind.RECTANGLE:
        return Rectangle(top, left, bh, bw)
    apex = left + rng.integers(0, bw - 1)
    bottom, right = top + bh - 1, left + bw - 1
    if rng.random() < 0.5:
        return Triangle(((top, apex), (bottom, left), (bottom, right)))
    return Triangle(((bottom, apex), (top, left), (top, right)))


def _background(spec: SynthSpec, rng: Xoshiro256) -> np.ndarray:
    h, w = spec.image_hw
    base = np.array([rng.uniform(0.2, 0.8) for _ in range(3)])
    angle = rng.uniform(0.0, 2.0 * math.pi)
    amplitude = rng.uniform(0.0, spec.gradient_amplitude)
    yy = np.arange(h)[:, None] / max(1, h - 1) - 0.5
    xx = np.arange(w)[None, :] / max(1, w - 1) - 0.5
    ramp = math.cos(angle) * xx + math.sin(angle) * yy
    return base[:, None, None] + amplitude * ramp[None]


def render_sample(spec: SynthSpec, index: int) -> Tuple[ImageSample, List[Shape]]:
    """Render sample ``index`` and return it with the shapes it was drawn from."""

    rng = Xoshiro256.for_stream(spec.seed, index)
    h, w = spec.image_hw
    background = _background(spec, rng)
    count = rng.integers(*spec.shapes_per_image)
    shapes = [sample_shape(spec, rng) for _ in range(count)]

    image = background.copy()
    mask = np.zeros((h, w), dtype=bool)
    for shape in shapes:
        support = shape.support(h, w)
        delta = rng.uniform(*spec.contrast)
        if not support.any():
            continue
        local_mean = background[:, support].mean(axis=1)
        fill = np.where(local_mean < 0.5, local_mean + delta, local_mean - delta)
        image[:, support] = fill[:, None]
        mask |= support

    amplitude = spec.noise_amplitude
    if amplitude > 0:
        noise = np.array([rng.uniform(-amplitude, amplitude) for _ in range(3 * h * w)]).reshape(3, h, w)
        image = image + noise
    image = quantize(np.clip(image, 0.0, 1.0)).astype(np.float32) / np.float32(255.0)
    sample = ImageSample(image=image, mask=mask[None].astype(np.float32), id=f"synth_{index:05d}")
    return sample, shapes


def generate_synthetic(spec: SynthSpec, n: int) -> List[ImageSample]:
    if n < 1:
        raise ValueError(f"synth: sample count must be >= 1, got {n}")
    return [render_sample(spec, index)[0] for index in range(n)]


__all__ = [
    "Ellipse",
    "Rectangle",
    "Triangle",
    "Shape",
    "rasterize",
    "sample_shape",
    "render_sample",
    "generate_synthetic",
]
