from __future__ import annotations

from pathlib import Path

import numpy as np

from pyamulet.data.netpbm import read_pgm
from pyamulet.data.synth import generate_synthetic
from pyamulet.models import ImageSample, SynthSpec
from pyamulet.network import init_params
from pyamulet.predict import ATTENTION_DIR, predict_sample, predict_samples, write_predictions
from pyamulet.telemetry import RunTelemetry

from .helpers import tiny_network


def test_prediction_maps_match_sample_size() -> None:
    config = tiny_network(hw=16)
    store = init_params(config, 0)
    sample = generate_synthetic(SynthSpec(image_hw=(24, 20)), 1)[0]
    prediction = predict_sample(sample, store, config)
    assert prediction.saliency.shape == (24, 20)
    assert len(prediction.attention) == 2
    assert len(prediction.level_maps) == 2
    assert all(m.shape == (24, 20) for m in prediction.attention + prediction.level_maps)
    assert np.all((prediction.saliency >= 0) & (prediction.saliency <= 1))


def test_thread_pool_matches_serial() -> None:
    config = tiny_network(hw=16)
    store = init_params(config, 0)
    samples = generate_synthetic(SynthSpec(image_hw=(16, 16)), 4)
    serial = predict_samples(samples, store, config)
    pooled = predict_samples(samples, store, config, jobs=2, telemetry=RunTelemetry())
    assert [p.id for p in pooled] == [s.id for s in samples]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.saliency, b.saliency)


def test_write_predictions_with_attention(tmp_path: Path) -> None:
    config = tiny_network(hw=16)
    store = init_params(config, 0)
    samples = generate_synthetic(SynthSpec(image_hw=(16, 16)), 2)
    predictions = predict_samples(samples, store, config)
    paths = write_predictions(predictions, tmp_path, attention=True)
    assert paths == [tmp_path / f"{s.id}.pgm" for s in samples]
    assert read_pgm(paths[0]).shape == (16, 16)
    exported = sorted(p.name for p in (tmp_path / ATTENTION_DIR).iterdir())
    assert exported == sorted(f"{s.id}_level{level}.pgm" for s in samples for level in (1, 2))


def test_attention_free_variant_exports_no_maps(tmp_path: Path) -> None:
    config = tiny_network(hw=16).for_variant("b")
    store = init_params(config, 0)
    rng = np.random.default_rng(0)
    sample = ImageSample(
        image=rng.random((3, 16, 16)).astype(np.float32), mask=np.zeros((1, 16, 16), dtype=np.float32), id="x"
    )
    prediction = predict_sample(sample, store, config)
    assert prediction.attention == []
    write_predictions([prediction], tmp_path)
    assert not (tmp_path / ATTENTION_DIR).exists()
