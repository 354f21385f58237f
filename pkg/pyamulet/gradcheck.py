"""Central finite-difference validation of the analytic backward passes."""
from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

from .errors import GradCheckError
from .losses import total_loss
from .models import LossConfig, Mode, NetworkConfig
from .network import forward, init_params
from .tensor import Tensor

logger = logging.getLogger(__name__)

ScalarFn = Callable[[], Tensor]


def _evaluate(f: ScalarFn) -> float:
    value = f().item()
    if not math.isfinite(value):
        raise GradCheckError(f"grad_check: function evaluated to non-finite value {value}")
    return value


def grad_check(
    f: ScalarFn,
    params: Sequence[Tensor],
    h: float = 1e-4,
    *,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Return ``max |analytic - numeric| / max(1, |numeric|)`` over parameter entries.

    ``f`` rebuilds its graph on every call from the current contents of
    ``params``, which must be 64-bit.  ``max_entries`` limits the check to a
    seeded random subset of each parameter's entries.
    """

    if not 1e-6 <= h <= 1e-3:
        raise GradCheckError(f"grad_check: step {h} outside [1e-6, 1e-3]")
    for param in params:
        if param.dtype != np.float64:
            raise GradCheckError(f"grad_check: parameters must be float64, got {param.dtype}")
        param.zero_grad()

    output = f()
    if not math.isfinite(output.item()):
        raise GradCheckError(f"grad_check: function evaluated to non-finite value {output.item()}")
    output.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for index, (param, grad) in enumerate(zip(params, analytic)):
        flat = param.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        for entry in entries:
            original = flat[entry]
            flat[entry] = original + h
            plus = _evaluate(f)
            flat[entry] = original - h
            minus = _evaluate(f)
            flat[entry] = original
            numeric = (plus - minus) / (2.0 * h)
            error = abs(float(grad.reshape(-1)[entry]) - numeric) / max(1.0, abs(numeric))
            worst = max(worst, error)
        logger.debug("grad_check: parameter %d checked %d entries, running max %.3e", index, entries.size, worst)
    return worst


def check_network(
    net_cfg: NetworkConfig,
    loss_cfg: LossConfig,
    seed: int = 0,
    h: float = 1e-4,
    *,
    max_entries: int | None = None,
) -> float:
    """Finite-difference check of the whole network's loss gradient on one random image.

    If a step straddles a ReLU or max-pool kink the error spikes; pass a
    smaller ``h`` (down to 1e-6) to tell a kink from a wrong backward.
    """

    store = init_params(net_cfg, seed).astype(np.float64)
    rng = np.random.default_rng(seed)
    height, width = net_cfg.input_hw
    image = Tensor(rng.random((1, 3, height, width)))
    mask = (rng.random((1, 1, height, width)) < 0.5).astype(np.float64)
    logger.info("grad_check: %d parameters in %d tensors", store.parameter_count(), len(store))

    def loss() -> Tensor:
        return total_loss(forward(image, store, net_cfg, Mode.TRAIN), mask, loss_cfg)

    return grad_check(loss, store.trainable(), h, max_entries=max_entries, seed=seed)


__all__ = ["grad_check", "check_network"]
