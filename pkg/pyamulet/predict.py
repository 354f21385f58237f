"""Batch inference over image samples."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .data.manifest import save_prediction
from .data.netpbm import write_pgm
from .models import ImageSample, Mode, NetworkConfig
from .network import forward
from .params import ParameterStore
from .telemetry import RunTelemetry
from .tensor import Tensor, resize_array, resize_bilinear

logger = logging.getLogger(__name__)

ATTENTION_DIR = "attention"


@dataclass
class Prediction:
    id: str
    saliency: np.ndarray
    attention: List[np.ndarray]
    level_maps: List[np.ndarray]


def _to_size(values: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    if values.shape == hw:
        return values
    return np.clip(resize_array(values, *hw), 0.0, 1.0)


def predict_sample(sample: ImageSample, params: ParameterStore, config: NetworkConfig) -> Prediction:
    """Run one image at ``config.input_hw``; every returned map is resized back to the sample size."""

    image = Tensor(sample.image.astype(np.float32)[None])
    if sample.hw != config.input_hw:
        image = resize_bilinear(image, *config.input_hw)
    trace = forward(image, params, config, Mode.INFER)
    saliency = trace.saliency.data[0, 0].astype(np.float64)
    attention = [a.data[0, 0].astype(np.float64) for a in trace.attention if a is not None]
    return Prediction(
        id=sample.id,
        saliency=_to_size(saliency, sample.hw),
        attention=[_to_size(a, sample.hw) for a in attention],
        level_maps=[_to_size(m[0], sample.hw) for m in trace.level_maps()],
    )


def predict_samples(
    samples: Sequence[ImageSample],
    params: ParameterStore,
    config: NetworkConfig,
    *,
    jobs: int = 1,
    telemetry: RunTelemetry | None = None,
) -> List[Prediction]:
    """Predict every sample in order; ``jobs > 1`` spreads images over a thread pool.

    Inference reads parameters and running statistics only, so workers share
    one store.
    """

    def run(sample: ImageSample) -> Prediction:
        if telemetry is None:
            return predict_sample(sample, params, config)
        with telemetry.time_image("predict"):
            return predict_sample(sample, params, config)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, samples))
    return [run(sample) for sample in samples]


def write_predictions(predictions: Sequence[Prediction], out_dir: str | Path, *, attention: bool = False) -> List[Path]:
    """``<out>/<id>.pgm`` per prediction, plus ``<out>/attention/<id>_level<l>.pgm`` when asked."""

    out_dir = Path(out_dir)
    paths = [save_prediction(out_dir, p.id, p.saliency) for p in predictions]
    if attention:
        attention_dir = out_dir / ATTENTION_DIR
        attention_dir.mkdir(parents=True, exist_ok=True)
        for p in predictions:
            for level, values in enumerate(p.attention, start=1):
                write_pgm(attention_dir / f"{p.id}_level{level}.pgm", values)
    logger.info("predict: wrote %d saliency maps to %s", len(paths), out_dir)
    return paths


__all__ = ["ATTENTION_DIR", "Prediction", "predict_sample", "predict_samples", "write_predictions"]
