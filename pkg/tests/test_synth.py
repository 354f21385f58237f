from __future__ import annotations

import numpy as np
import pytest

from pyamulet.data.synth import Ellipse, Rectangle, Triangle, generate_synthetic, rasterize, render_sample
from pyamulet.errors import ConfigError
from pyamulet.models import ShapeKind, SynthSpec


def test_generation_is_deterministic() -> None:
    spec = SynthSpec(image_hw=(32, 32))
    first, second = generate_synthetic(spec, 4), generate_synthetic(spec, 4)
    for a, b in zip(first, second):
        assert a.id == b.id
        np.testing.assert_array_equal(a.image, b.image)
        np.testing.assert_array_equal(a.mask, b.mask)
    assert [s.id for s in first] == ["synth_00000", "synth_00001", "synth_00002", "synth_00003"]


def test_samples_are_independent_of_count() -> None:
    spec = SynthSpec(image_hw=(32, 32))
    np.testing.assert_array_equal(generate_synthetic(spec, 5)[3].image, render_sample(spec, 3)[0].image)


def test_seed_changes_the_dataset() -> None:
    a = generate_synthetic(SynthSpec(image_hw=(32, 32), seed=1), 1)[0]
    b = generate_synthetic(SynthSpec(image_hw=(32, 32), seed=2), 1)[0]
    assert not np.array_equal(a.image, b.image)


def test_sample_layout() -> None:
    sample = generate_synthetic(SynthSpec(), 1)[0]
    assert sample.image.shape == (3, 64, 64)
    assert sample.mask.shape == (1, 64, 64)
    assert sample.image.dtype == np.float32
    assert np.all((sample.image >= 0) & (sample.image <= 1))
    assert np.all((sample.mask == 0) | (sample.mask == 1))
    # pixel values sit on the 8-bit grid so a PPM round trip is lossless
    np.testing.assert_allclose(sample.image * 255, np.rint(sample.image * 255), atol=1e-4)


def test_mask_is_union_of_shape_supports() -> None:
    spec = SynthSpec(image_hw=(40, 40), shapes_per_image=(2, 3))
    for index in range(5):
        sample, shapes = render_sample(spec, index)
        assert 2 <= len(shapes) <= 3
        np.testing.assert_array_equal(sample.mask[0].astype(bool), rasterize(shapes, 40, 40))


def test_rectangle_area() -> None:
    assert Rectangle(2, 3, 4, 5).support(16, 16).sum() == 20


def test_ellipse_matches_pointwise_test() -> None:
    shape = Ellipse(cy=7, cx=9, ry=4, rx=6)
    support = shape.support(16, 20)
    for y in range(16):
        for x in range(20):
            inside = ((y - 7) / 4) ** 2 + ((x - 9) / 6) ** 2 <= 1.0 + 1e-12
            assert support[y, x] == inside


def test_triangle_boundary_is_inclusive_and_order_free() -> None:
    clockwise = Triangle(((0, 0), (0, 4), (4, 0)))
    counter = Triangle(((0, 0), (4, 0), (0, 4)))
    assert clockwise.support(6, 6).sum() == 15
    np.testing.assert_array_equal(clockwise.support(6, 6), counter.support(6, 6))


def test_shape_transforms_match_array_transforms() -> None:
    shapes = [Ellipse(5, 8, 3, 4), Rectangle(1, 2, 5, 3), Triangle(((2, 3), (9, 1), (7, 10)))]
    h = w = 14
    for shape in shapes:
        support = shape.support(h, w)
        np.testing.assert_array_equal(shape.rot90(h, w).support(w, h), np.rot90(support))
        np.testing.assert_array_equal(shape.mirror(w).support(h, w), support[:, ::-1])


def test_shapes_respect_margin() -> None:
    spec = SynthSpec(image_hw=(32, 32), margin=3)
    for index in range(10):
        mask = render_sample(spec, index)[0].mask[0]
        assert not mask[:3].any() and not mask[-3:].any()
        assert not mask[:, :3].any() and not mask[:, -3:].any()


def test_touch_boundary_profile_reaches_the_edge() -> None:
    spec = SynthSpec(image_hw=(32, 32), shapes_per_image=(1, 1), kinds=(ShapeKind.RECTANGLE,), touch_boundary=True)
    for index in range(10):
        mask = render_sample(spec, index)[0].mask[0]
        assert mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any()


def test_shape_contrast_against_flat_background() -> None:
    spec = SynthSpec(
        image_hw=(32, 32),
        shapes_per_image=(1, 1),
        kinds=(ShapeKind.RECTANGLE,),
        noise_amplitude=0.0,
        gradient_amplitude=0.0,
    )
    low = spec.contrast[0]
    for index in range(5):
        sample, _ = render_sample(spec, index)
        inside = sample.mask[0] == 1
        for c in range(3):
            gap = abs(sample.image[c][inside].mean() - sample.image[c][~inside].mean())
            assert gap >= low - 2 / 255


def test_invalid_counts() -> None:
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(), 0)
    with pytest.raises(ConfigError):
        SynthSpec(shapes_per_image=(3, 1))
