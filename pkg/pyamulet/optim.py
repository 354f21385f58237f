"""SGD with momentum and decoupled-from-bias weight decay."""
from __future__ import annotations

import logging

import numpy as np

from .errors import DivergenceError
from .models import OptimConfig
from .params import ParameterStore, is_bias

logger = logging.getLogger(__name__)


def sgd_step(params: ParameterStore, optim: OptimConfig, lr: float | None = None) -> ParameterStore:
    """v <- m v - lr (g + wd w);  w <- w + v.  Biases skip the decay term.

    Gradients are read from each parameter's ``grad`` slot.  The step is
    all-or-nothing: a missing or non-finite gradient aborts before any update.
    """

    lr = optim.lr if lr is None else lr
    missing = [name for name, t in params.params.items() if t.grad is None]
    if missing:
        raise ValueError(f"sgd: no gradient for {', '.join(missing)}")
    bad = [name for name, t in params.params.items() if not np.all(np.isfinite(t.grad))]
    if bad:
        logger.error("sgd: non-finite gradients in %s", ", ".join(bad))
        raise DivergenceError(f"sgd: non-finite gradient in {', '.join(bad)}")

    for name, tensor in params.params.items():
        w = tensor.data
        step = tensor.grad if is_bias(name) else tensor.grad + optim.weight_decay * w
        velocity = params.momentum[name]
        velocity[...] = optim.momentum * velocity - lr * step
        w += velocity
    return params


__all__ = ["sgd_step"]
