"""Random crop, mirror and right-angle rotation applied jointly to image and mask."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .models import AugmentSpec, ImageSample
from .tensor import resize_array, resize_nearest


def augment(
    sample: ImageSample,
    spec: AugmentSpec,
    rng: np.random.Generator,
    output_hw: Tuple[int, int] | None = None,
) -> ImageSample:
    """Draw one mirror flag, one rotation and one crop window, apply them to both planes.

    The RNG is consumed identically whatever ``spec`` allows, so batches stay
    aligned across augmentation settings.  The image is resized bilinearly to
    ``output_hw`` (default: the input size); the mask by nearest neighbour and
    re-binarized at 0.5.
    """

    mirror_draw = rng.random()
    count = len(spec.rotations)
    rotation = spec.rotations[min(int(rng.random() * count), count - 1)]
    low, high = spec.crop_fraction_range
    fraction = low + (high - low) * rng.random()
    y_draw, x_draw = rng.random(), rng.random()

    image, mask = sample.image, sample.mask
    if spec.mirror and mirror_draw < 0.5:
        image, mask = image[:, :, ::-1], mask[:, :, ::-1]
    turns = rotation // 90
    if turns:
        image = np.rot90(image, turns, axes=(1, 2))
        mask = np.rot90(mask, turns, axes=(1, 2))

    h, w = image.shape[1:]
    crop_h = max(1, min(h, int(round(fraction * h))))
    crop_w = max(1, min(w, int(round(fraction * w))))
    top = min(int(y_draw * (h - crop_h + 1)), h - crop_h)
    left = min(int(x_draw * (w - crop_w + 1)), w - crop_w)
    image = image[:, top : top + crop_h, left : left + crop_w]
    mask = mask[:, top : top + crop_h, left : left + crop_w]

    out_h, out_w = output_hw if output_hw is not None else sample.hw
    image = resize_array(np.ascontiguousarray(image), out_h, out_w)
    mask = (resize_nearest(np.ascontiguousarray(mask, dtype=np.float32), out_h, out_w) > 0.5).astype(sample.mask.dtype)
    return ImageSample(image=image, mask=mask, id=sample.id)


__all__ = ["augment"]
