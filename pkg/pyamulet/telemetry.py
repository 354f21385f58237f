"""Per-run Prometheus metrics written to a text file when the run ends."""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.prom"


class RunTelemetry:
    """Metrics for one batch run, kept in a private registry."""

    def __init__(self) -> None:
        self.registry = CollectorRegistry()
        self.step_seconds = Histogram(
            "pyamulet_train_step_seconds",
            "Wall time of one training iteration",
            registry=self.registry,
        )
        self.train_loss = Gauge(
            "pyamulet_train_loss",
            "Per-pixel training loss of the latest iteration",
            registry=self.registry,
        )
        self.learning_rate = Gauge(
            "pyamulet_learning_rate",
            "Current SGD learning rate",
            registry=self.registry,
        )
        self.lr_decays = Counter(
            "pyamulet_lr_decays",
            "Learning-rate decays triggered by the plateau rule",
            registry=self.registry,
        )
        self.image_seconds = Histogram(
            "pyamulet_eval_image_seconds",
            "Per-image processing time",
            labelnames=("stage",),
            registry=self.registry,
        )

    @contextmanager
    def time_image(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.image_seconds.labels(stage=stage).observe(time.perf_counter() - start)

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / METRICS_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        logger.debug("telemetry: wrote %s", path)
        return path


__all__ = ["METRICS_FILE", "RunTelemetry"]
