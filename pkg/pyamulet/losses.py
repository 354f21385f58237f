"""Class-balanced, deeply supervised cross-entropy."""
from __future__ import annotations

import logging
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, ShapeError
from .models import LossConfig
from .network import ForwardTrace
from .tensor import Tensor, add, log_softmax_channels, scale, weighted_sum

logger = logging.getLogger(__name__)


class ClassBalance(NamedTuple):
    beta: float
    one_minus_beta: float
    degenerate: bool


def class_balance(mask: np.ndarray) -> ClassBalance:
    """beta = |Y-| / |Y|; a single-class mask is flagged as degenerate."""

    mask = np.asarray(mask)
    if mask.size == 0:
        raise InputError("class_balance: empty mask")
    foreground = mask == 1
    if not np.all(foreground | (mask == 0)):
        raise InputError("class_balance: mask values must be 0 or 1")
    total_count = mask.size
    background_count = total_count - int(np.count_nonzero(foreground))
    beta = background_count / total_count
    degenerate = background_count in (0, total_count)
    if degenerate:
        logger.debug("class_balance: single-class mask, one loss term vanishes")
    return ClassBalance(beta, 1.0 - beta, degenerate)


def _batched_mask(mask: np.ndarray, n: int, h: int, w: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim == 2:
        mask = mask[None, None]
    elif mask.ndim == 3:
        mask = mask[:, None] if mask.shape[0] == n and n > 1 else mask[None]
    if mask.shape[0] == 1 and n > 1:
        mask = np.broadcast_to(mask, (n,) + mask.shape[1:])
    if mask.shape != (n, 1, h, w):
        raise ShapeError(f"loss: mask dims {mask.shape} do not match logits (n,h,w)=({n},{h},{w})")
    return mask


def level_loss(s_l: Tensor, mask: np.ndarray, beta: float | Sequence[float]) -> Tensor:
    """-beta * sum_{Y+} log p1 - (1 - beta) * sum_{Y-} log p0, summed over the batch.

    ``beta`` is a scalar or one value per image.
    """

    n, c, h, w = s_l.dims
    if c != 2:
        raise ShapeError(f"level_loss: logits need 2 channels, got {c}")
    mask = _batched_mask(mask, n, h, w)
    betas = np.broadcast_to(np.asarray(beta, dtype=np.float64).reshape(-1), (n,)).reshape(n, 1, 1, 1)
    weights = np.empty((n, 2, h, w), dtype=np.float64)
    weights[:, 1:2] = betas * (mask == 1)
    weights[:, 0:1] = (1.0 - betas) * (mask == 0)
    return scale(weighted_sum(log_softmax_channels(s_l), weights), -1.0)


def _image_balances(mask: np.ndarray, loss_cfg: LossConfig) -> np.ndarray:
    mask = np.asarray(mask)
    # (n, 1, h, w) and (n, h, w) both carry one mask per image along axis 0
    if mask.ndim in (3, 4):
        per_image = [mask[i] for i in range(mask.shape[0])]
    else:
        per_image = [mask]
    if not loss_cfg.class_balance:
        return np.full(len(per_image), 0.5)
    return np.array([class_balance(m).beta for m in per_image])


def total_loss(trace: ForwardTrace, mask: np.ndarray, loss_cfg: LossConfig) -> Tensor:
    """sum_l alpha_l * L_l over every level; no fused term.

    Without class balancing both terms carry weight 0.5.
    """

    alpha = loss_cfg.weights(len(trace.logits))
    betas = _image_balances(mask, loss_cfg)
    terms = [scale(level_loss(s_l, mask, betas), a) for s_l, a in zip(trace.logits, alpha)]
    return add(*terms)


__all__ = ["ClassBalance", "class_balance", "level_loss", "total_loss"]
