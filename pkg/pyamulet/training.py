"""Training loop: batch sampling, augmentation, deep supervision and SGD.

Iterations are numbered from 1.  Iteration ``i`` draws its batch from
``np.random.default_rng([seed, i])``, so a run resumed from a checkpoint
replays exactly the batches an uninterrupted run would have seen.
"""
from __future__ import annotations

import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Sequence

import numpy as np

from .augment import augment
from .checkpoint import Checkpoint, TrainingState, save_checkpoint
from .errors import CheckpointError, DivergenceError, InputError
from .losses import total_loss
from .models import AugmentSpec, ImageSample, LossConfig, Mode, NetworkConfig, OptimConfig
from .network import forward, init_params, parameter_layout
from .optim import sgd_step
from .params import ParameterStore
from .telemetry import RunTelemetry
from .tensor import Tensor, scale

logger = logging.getLogger(__name__)

LOG_HEADER = "iter,loss_raw,loss_per_pixel,lr"
FINAL_CHECKPOINT = "final.aamu"


def checkpoint_name(iteration: int) -> str:
    return f"ckpt_iter{iteration:06d}.aamu"


@dataclass(frozen=True)
class LossRecord:
    iteration: int
    loss_raw: float
    loss_per_pixel: float
    lr: float

    def to_row(self) -> str:
        return f"{self.iteration},{self.loss_raw:.9g},{self.loss_per_pixel:.9g},{self.lr:.9g}"


@dataclass
class TrainingLog:
    records: List[LossRecord] = field(default_factory=list)

    def append(self, record: LossRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> List[float]:
        return [r.loss_per_pixel for r in self.records]

    def to_csv(self) -> str:
        return "\n".join([LOG_HEADER, *(r.to_row() for r in self.records)]) + "\n"

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8", newline="\n")
        return path


@dataclass
class Batch:
    iteration: int
    images: np.ndarray
    masks: np.ndarray
    ids: List[str]


@dataclass
class TrainingResult:
    store: ParameterStore
    network: NetworkConfig
    state: TrainingState
    log: TrainingLog


def make_batch(
    dataset: Sequence[ImageSample],
    iteration: int,
    seed: int,
    batch_size: int,
    spec: AugmentSpec,
    input_hw: tuple[int, int],
) -> Batch:
    """Sample ``batch_size`` images with replacement and augment them in index order."""

    rng = np.random.default_rng([seed, iteration])
    indices = rng.integers(len(dataset), size=batch_size)
    samples = [augment(dataset[int(idx)], spec, rng, input_hw) for idx in indices]
    images = np.stack([s.image for s in samples]).astype(np.float32)
    masks = np.stack([s.mask for s in samples]).astype(np.float32)
    return Batch(iteration, images, masks, [s.id for s in samples])


class BatchProducer:
    """Builds batches for iterations ``start..stop`` on a background thread.

    Batches arrive strictly in iteration order through a bounded queue.  An
    exception raised while building a batch is re-raised in the consumer.
    """

    _DONE = object()

    def __init__(
        self,
        dataset: Sequence[ImageSample],
        seed: int,
        optim: OptimConfig,
        spec: AugmentSpec,
        input_hw: tuple[int, int],
        start: int,
        stop: int,
        depth: int = 4,
    ) -> None:
        self._args = (dataset, seed, optim.batch_size, spec, input_hw)
        self._range = (start, stop)
        self._queue: queue.Queue = queue.Queue(maxsize=depth)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="batch-producer", daemon=True)

    def start(self) -> "BatchProducer":
        self._thread.start()
        return self

    def __enter__(self) -> "BatchProducer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def _put(self, item) -> bool:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _run(self) -> None:
        dataset, seed, batch_size, spec, input_hw = self._args
        start, stop = self._range
        try:
            for iteration in range(start, stop + 1):
                if not self._put(make_batch(dataset, iteration, seed, batch_size, spec, input_hw)):
                    return
        except Exception as exc:  # forwarded to the consumer
            self._put(exc)
            return
        self._put(self._DONE)

    def __iter__(self) -> Iterator[Batch]:
        while True:
            item = self._queue.get()
            if item is self._DONE:
                return
            if isinstance(item, Exception):
                raise item
            yield item

    def close(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)


def _validate_dataset(dataset: Sequence[ImageSample]) -> None:
    if not dataset:
        raise InputError("train: dataset is empty")
    for sample in dataset:
        if not np.all((sample.mask == 0) | (sample.mask == 1)):
            raise InputError(f"train: mask of {sample.id} is not binary")


def _plateaued(window: List[float], size: int, tolerance: float) -> bool:
    previous = float(np.mean(window[:size]))
    recent = float(np.mean(window[size:]))
    return recent > tolerance * previous


def train(
    dataset: Sequence[ImageSample],
    net_cfg: NetworkConfig,
    loss_cfg: LossConfig,
    optim_cfg: OptimConfig,
    aug_spec: AugmentSpec,
    seed: int,
    checkpoint_dir: str | Path | None = None,
    *,
    checkpoint_every: int = 100,
    log_every: int = 10,
    resume: Checkpoint | None = None,
    telemetry: RunTelemetry | None = None,
    prefetch: bool = False,
    log: TrainingLog | None = None,
) -> TrainingResult:
    """Run SGD until ``optim_cfg.max_iters``.

    The objective is the deeply supervised loss divided by batch size and
    pixel count; the log keeps both the per-image sum and the per-pixel value.
    On a non-finite loss or gradient :class:`DivergenceError` is raised and
    the last periodic checkpoint on disk is left untouched.  Records are
    appended to ``log`` when one is passed, so a caller keeps the rows written
    before a failure.
    """

    _validate_dataset(dataset)
    loss_cfg.weights(net_cfg.levels)
    if resume is not None:
        if resume.network != net_cfg:
            raise CheckpointError("train: checkpoint was written for a different network configuration")
        resume.store.validate(parameter_layout(net_cfg))
        store = resume.store
        state = TrainingState(resume.state.iteration, resume.state.lr_decays, list(resume.state.loss_window))
        logger.info("train: resuming after iteration %d", state.iteration)
    else:
        store = init_params(net_cfg, seed)
        state = TrainingState()

    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    window_size = optim_cfg.plateau_window
    pixels = net_cfg.input_hw[0] * net_cfg.input_hw[1]
    lr = optim_cfg.lr * optim_cfg.lr_decay_factor**state.lr_decays
    log = log if log is not None else TrainingLog()
    start, stop = state.iteration + 1, optim_cfg.max_iters

    def batches() -> Iterator[Batch]:
        for iteration in range(start, stop + 1):
            yield make_batch(dataset, iteration, seed, optim_cfg.batch_size, aug_spec, net_cfg.input_hw)

    producer = (
        BatchProducer(dataset, seed, optim_cfg, aug_spec, net_cfg.input_hw, start, stop) if prefetch else None
    )
    try:
        source = iter(producer.start()) if producer is not None else batches()
        for batch in source:
            iteration = batch.iteration
            began = time.perf_counter()
            n = batch.images.shape[0]
            store.zero_grad()
            trace = forward(Tensor(batch.images), store, net_cfg, Mode.TRAIN)
            raw = total_loss(trace, batch.masks, loss_cfg)
            value = raw.item()
            if not math.isfinite(value):
                logger.error("train: non-finite loss at iteration %d", iteration)
                raise DivergenceError(f"train: loss became {value} at iteration {iteration}", iteration)
            scale(raw, 1.0 / (n * pixels)).backward()
            try:
                sgd_step(store, optim_cfg, lr)
            except DivergenceError as exc:
                raise DivergenceError(f"train: {exc} at iteration {iteration}", iteration) from exc

            record = LossRecord(iteration, value / n, value / (n * pixels), lr)
            log.append(record)
            state.iteration = iteration
            state.loss_window.append(float(np.float32(record.loss_per_pixel)))
            del state.loss_window[: -2 * window_size]
            if len(state.loss_window) == 2 * window_size and iteration % window_size == 0:
                if _plateaued(state.loss_window, window_size, optim_cfg.plateau_tolerance):
                    state.lr_decays += 1
                    lr = optim_cfg.lr * optim_cfg.lr_decay_factor**state.lr_decays
                    logger.info("train: loss plateau at iteration %d, lr -> %.3g", iteration, lr)
                    if telemetry is not None:
                        telemetry.lr_decays.inc()

            if telemetry is not None:
                telemetry.step_seconds.observe(time.perf_counter() - began)
                telemetry.train_loss.set(record.loss_per_pixel)
                telemetry.learning_rate.set(lr)
            if iteration % log_every == 0 or iteration == start:
                logger.info("train: iter %d loss %.6f per pixel (lr %.3g)", iteration, record.loss_per_pixel, lr)
            if checkpoint_dir is not None and iteration % checkpoint_every == 0:
                save_checkpoint(checkpoint_dir / checkpoint_name(iteration), Checkpoint(store, net_cfg, state))
    finally:
        if producer is not None:
            producer.close()

    if checkpoint_dir is not None:
        save_checkpoint(checkpoint_dir / FINAL_CHECKPOINT, Checkpoint(store, net_cfg, state))
    return TrainingResult(store=store, network=net_cfg, state=state, log=log)


__all__ = [
    "LOG_HEADER",
    "FINAL_CHECKPOINT",
    "checkpoint_name",
    "LossRecord",
    "TrainingLog",
    "Batch",
    "TrainingResult",
    "make_batch",
    "BatchProducer",
    "train",
]
