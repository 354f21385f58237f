"""Core configuration and record types shared across the PyAmulet modules."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Tuple

import numpy as np

from .errors import ConfigError, InputError


class Mode(str, Enum):
    TRAIN = "train"
    INFER = "infer"


class AttentionDirection(str, Enum):
    TOP_DOWN = "top_down"
    BOTTOM_UP = "bottom_up"


class ShapeKind(str, Enum):
    ELLIPSE = "ellipse"
    RECTANGLE = "rectangle"
    TRIANGLE = "triangle"


VARIANT_LABELS = ("a", "b", "c", "d", "e", "f")


@dataclass
class NetworkConfig:
    levels: int = 5
    input_hw: Tuple[int, int] = (64, 64)
    backbone_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 64, 64])
    agg_width: int = 16
    attention_kernel: int = 3
    prediction_kernel: int = 1
    pyramid: bool = True
    attention_enabled: bool = True
    attention_direction: AttentionDirection = AttentionDirection.TOP_DOWN
    aggregation: bool = True
    stage_depth: int = 2

    def __post_init__(self) -> None:
        self.input_hw = (int(self.input_hw[0]), int(self.input_hw[1]))
        self.backbone_channels = [int(c) for c in self.backbone_channels]
        self.attention_direction = AttentionDirection(self.attention_direction)
        self.validate()

    @property
    def strides(self) -> List[int]:
        return [2 ** idx for idx in range(self.levels)]

    @property
    def top_down(self) -> bool:
        return self.attention_direction is AttentionDirection.TOP_DOWN

    def validate(self) -> None:
        if self.levels < 2:
            raise ConfigError(f"network: levels must be >= 2, got {self.levels}", "network.levels")
        if len(self.backbone_channels) != self.levels:
            raise ConfigError(
                f"network: backbone_channels has {len(self.backbone_channels)} entries, expected {self.levels}",
                "network.backbone_channels",
            )
        if any(c <= 0 for c in self.backbone_channels):
            raise ConfigError("network: backbone channel counts must be positive", "network.backbone_channels")
        coarsest = self.strides[-1]
        height, width = self.input_hw
        if height <= 0 or width <= 0 or height % coarsest or width % coarsest:
            raise ConfigError(
                f"network: input_hw {self.input_hw} is not divisible by the coarsest stride {coarsest}",
                "network.input_hw",
            )
        if self.agg_width <= 0:
            raise ConfigError("network: agg_width must be positive", "network.agg_width")
        if self.attention_kernel <= 0 or self.attention_kernel % 2 == 0:
            raise ConfigError("network: attention_kernel must be a positive odd size", "network.attention_kernel")
        if self.prediction_kernel <= 0 or self.prediction_kernel % 2 == 0:
            raise ConfigError("network: prediction_kernel must be a positive odd size", "network.prediction_kernel")
        if self.stage_depth <= 0:
            raise ConfigError("network: stage_depth must be positive", "network.stage_depth")
        if not self.aggregation and self.attention_enabled:
            raise ConfigError(
                "network: attention requires aggregated features (aggregation=true)", "network.aggregation"
            )

    def check_batch(self, batch_size: int, key: str) -> None:
        """Train-mode batch norm at the coarsest level needs at least two items per channel."""

        height, width = self.input_hw
        coarsest = self.strides[-1]
        items = batch_size * (height // coarsest) * (width // coarsest)
        if items < 2:
            raise ConfigError(
                f"network: a batch of {batch_size} at input_hw {self.input_hw} leaves {items} value(s) "
                f"per channel for batch norm at level {self.levels}",
                key,
            )

    def attention_stack_size(self, level: int) -> int:
        """Number of previously computed attention maps consumed at ``level``."""

        available = self.levels - level if self.top_down else level - 1
        return available if self.pyramid else min(1, available)

    def processing_order(self) -> List[int]:
        """Levels in the order the attention/prediction recursion visits them."""

        order = list(range(self.levels, 0, -1))
        return order if self.top_down else order[::-1]

    def for_variant(self, label: str) -> "NetworkConfig":
        """Return the ablation analog named by ``label`` built on this config."""

        label = label.strip().lower()
        if label == "a":
            return replace(self, aggregation=False, attention_enabled=False)
        if label == "b":
            return replace(self, aggregation=True, attention_enabled=False)
        if label == "c":
            return replace(
                self,
                aggregation=True,
                attention_enabled=True,
                pyramid=False,
                attention_direction=AttentionDirection.BOTTOM_UP,
            )
        if label == "d":
            return replace(
                self,
                aggregation=True,
                attention_enabled=True,
                pyramid=False,
                attention_direction=AttentionDirection.TOP_DOWN,
            )
        if label == "e":
            return replace(
                self,
                aggregation=True,
                attention_enabled=True,
                pyramid=True,
                attention_direction=AttentionDirection.TOP_DOWN,
            )
        if label == "f":
            return replace(self.for_variant("e"), stage_depth=self.stage_depth * 2)
        raise ConfigError(f"network: unknown variant {label!r}", "variants")


@dataclass
class LossConfig:
    alpha: List[float] | None = None
    class_balance: bool = True

    def __post_init__(self) -> None:
        if self.alpha is not None:
            self.alpha = [float(a) for a in self.alpha]
            if any(a < 0 for a in self.alpha):
                raise ConfigError("loss: alpha weights must be non-negative", "loss.alpha")

    def weights(self, levels: int) -> List[float]:
        if self.alpha is None:
            return [1.0] * levels
        if len(self.alpha) != levels:
            raise ConfigError(f"loss: alpha has {len(self.alpha)} entries, expected {levels}", "loss.alpha")
        return list(self.alpha)


@dataclass
class OptimConfig:
    lr: float = 1e-2
    full_scale_lr: float = 1e-8
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 8
    lr_decay_factor: float = 0.9
    plateau_window: int = 100
    plateau_tolerance: float = 0.999
    max_iters: int = 2000

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ConfigError(f"optim: lr must be positive, got {self.lr}", "optim.lr")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"optim: momentum must lie in [0, 1), got {self.momentum}", "optim.momentum")
        if self.weight_decay < 0:
            raise ConfigError("optim: weight_decay must be non-negative", "optim.weight_decay")
        if self.batch_size < 1:
            raise ConfigError("optim: batch_size must be >= 1", "optim.batch_size")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError("optim: lr_decay_factor must lie in (0, 1]", "optim.lr_decay_factor")
        if self.plateau_window < 1:
            raise ConfigError("optim: plateau_window must be >= 1", "optim.plateau_window")
        if self.max_iters < 0:
            raise ConfigError("optim: max_iters must be non-negative", "optim.max_iters")


@dataclass
class AugmentSpec:
    mirror: bool = True
    rotations: Tuple[int, ...] = (0, 90, 180, 270)
    crop_fraction_range: Tuple[float, float] = (0.8, 1.0)

    def __post_init__(self) -> None:
        self.rotations = tuple(int(r) for r in self.rotations)
        self.crop_fraction_range = (float(self.crop_fraction_range[0]), float(self.crop_fraction_range[1]))
        if not self.rotations or any(r not in (0, 90, 180, 270) for r in self.rotations):
            raise ConfigError(
                f"augment: rotations must be a non-empty subset of 0/90/180/270, got {self.rotations}",
                "augment.rotations",
            )
        low, high = self.crop_fraction_range
        if not 0 < low <= high <= 1:
            raise ConfigError(
                f"augment: crop_fraction_range {self.crop_fraction_range} must satisfy 0 < low <= high <= 1",
                "augment.crop_fraction_range",
            )

    @classmethod
    def identity(cls) -> "AugmentSpec":
        return cls(mirror=False, rotations=(0,), crop_fraction_range=(1.0, 1.0))


@dataclass
class SynthSpec:
    image_hw: Tuple[int, int] = (64, 64)
    shapes_per_image: Tuple[int, int] = (1, 3)
    kinds: Tuple[ShapeKind, ...] = (ShapeKind.ELLIPSE, ShapeKind.RECTANGLE, ShapeKind.TRIANGLE)
    size_fraction: Tuple[float, float] = (0.2, 0.45)
    contrast: Tuple[float, float] = (0.25, 0.45)
    noise_amplitude: float = 0.04
    gradient_amplitude: float = 0.2
    margin: int = 2
    touch_boundary: bool = False
    seed: int = 42

    def __post_init__(self) -> None:
        self.image_hw = (int(self.image_hw[0]), int(self.image_hw[1]))
        self.shapes_per_image = (int(self.shapes_per_image[0]), int(self.shapes_per_image[1]))
        self.kinds = tuple(ShapeKind(k) for k in self.kinds)
        self.size_fraction = (float(self.size_fraction[0]), float(self.size_fraction[1]))
        self.contrast = (float(self.contrast[0]), float(self.contrast[1]))
        low, high = self.shapes_per_image
        if not 1 <= low <= high:
            raise ConfigError("synth: shapes_per_image must satisfy 1 <= low <= high", "data.synth.shapes_per_image")
        if not self.kinds:
            raise ConfigError("synth: at least one shape kind is required", "data.synth.kinds")
        if not 0 < self.size_fraction[0] <= self.size_fraction[1] < 1:
            raise ConfigError("synth: size_fraction must lie in (0, 1)", "data.synth.size_fraction")
        if not 0 <= self.contrast[0] <= self.contrast[1] <= 0.5:
            raise ConfigError("synth: contrast must satisfy 0 <= low <= high <= 0.5", "data.synth.contrast")
        if min(self.image_hw) < 2 * self.margin + 4:
            raise ConfigError("synth: image_hw too small for the configured margin", "data.synth.image_hw")


@dataclass
class DataConfig:
    seed: int = 42
    holdout_fraction: float = 0.25
    checkpoint_every: int = 100
    log_every: int = 10
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self) -> None:
        if not 0 <= self.holdout_fraction < 1:
            raise ConfigError("data: holdout_fraction must lie in [0, 1)", "data.holdout_fraction")
        if self.checkpoint_every < 1:
            raise ConfigError("data: checkpoint_every must be >= 1", "data.checkpoint_every")
        if self.log_every < 1:
            raise ConfigError("data: log_every must be >= 1", "data.log_every")


@dataclass
class ImageSample:
    image: np.ndarray
    mask: np.ndarray
    id: str

    def __post_init__(self) -> None:
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise InputError(f"sample {self.id}: image must have dims (3, h, w), got {self.image.shape}")
        if self.mask.ndim == 2:
            self.mask = self.mask[None]
        if self.mask.ndim != 3 or self.mask.shape[0] != 1:
            raise InputError(f"sample {self.id}: mask must have dims (1, h, w), got {self.mask.shape}")
        if self.image.shape[1:] != self.mask.shape[1:]:
            raise InputError(
                f"sample {self.id}: image {self.image.shape[1:]} and mask {self.mask.shape[1:]} differ in size"
            )
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise InputError(f"sample {self.id}: mask is not binary")

    @property
    def hw(self) -> Tuple[int, int]:
        return int(self.image.shape[1]), int(self.image.shape[2])


__all__ = [
    "Mode",
    "AttentionDirection",
    "ShapeKind",
    "VARIANT_LABELS",
    "NetworkConfig",
    "LossConfig",
    "OptimConfig",
    "AugmentSpec",
    "SynthSpec",
    "DataConfig",
    "ImageSample",
]
