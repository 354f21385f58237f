"""Saliency metrics: PR sweep, F-measure, MAE and S-measure.

Every function accepts raw ``(h, w)`` arrays or the :class:`SaliencyMap` /
:class:`GroundTruth` wrappers.  Predictions are binarized with a strict
``pred > t`` over the 256 thresholds ``k / 255``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import InputError, ShapeError

logger = logging.getLogger(__name__)

ETA2 = 0.3
S_LAMBDA = 0.5
EPS = np.finfo(np.float64).eps
THRESHOLDS = np.arange(256, dtype=np.float64) / 255.0


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray
    id: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 3 and values.shape[0] == 1:
            values = values[0]
        if values.ndim != 2:
            raise ShapeError(f"saliency map {self.id}: expected (h, w), got {values.shape}")
        if values.size and (values.min() < 0 or values.max() > 1):
            raise InputError(f"saliency map {self.id}: values must lie in [0, 1]")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class GroundTruth:
    values: np.ndarray
    id: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 3 and values.shape[0] == 1:
            values = values[0]
        if values.ndim != 2:
            raise ShapeError(f"ground truth {self.id}: expected (h, w), got {values.shape}")
        if not np.all((values == 0) | (values == 1)):
            raise InputError(f"ground truth {self.id}: values must be 0 or 1")
        object.__setattr__(self, "values", values)


def _pair(pred, gt) -> Tuple[np.ndarray, np.ndarray]:
    pred = pred if isinstance(pred, SaliencyMap) else SaliencyMap(pred)
    gt = gt if isinstance(gt, GroundTruth) else GroundTruth(gt)
    if pred.values.shape != gt.values.shape:
        raise ShapeError(f"metrics: prediction {pred.values.shape} and ground truth {gt.values.shape} differ")
    return pred.values, gt.values


class PRCurve(NamedTuple):
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray


def _precision(tp: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    # nothing predicted means nothing predicted wrongly
    return np.where(predicted > 0, tp / np.maximum(predicted, 1), 1.0)


def image_pr(pred, gt) -> PRCurve:
    """Precision and recall of one image at every threshold.

    Recall is NaN throughout when the ground truth has no foreground.
    """

    pred, gt = _pair(pred, gt)
    flat_pred = pred.reshape(-1)
    fg = gt.reshape(-1) == 1
    binary = flat_pred[None, :] > THRESHOLDS[:, None]
    tp = np.count_nonzero(binary & fg[None, :], axis=1).astype(np.float64)
    predicted = np.count_nonzero(binary, axis=1).astype(np.float64)
    positives = int(np.count_nonzero(fg))
    recall = tp / positives if positives else np.full(THRESHOLDS.shape, np.nan)
    return PRCurve(THRESHOLDS.copy(), _precision(tp, predicted), recall)


def pr_curve(preds: Sequence, gts: Sequence) -> PRCurve:
    """Mean precision and recall over images at each of the 256 thresholds.

    Images with an empty ground truth are left out of the recall average.
    """

    if len(preds) != len(gts):
        raise ShapeError(f"pr_curve: {len(preds)} predictions for {len(gts)} ground truths")
    if not preds:
        raise InputError("pr_curve: at least one image pair is required")
    curves = [image_pr(p, g) for p, g in zip(preds, gts)]
    precision = np.mean([c.precision for c in curves], axis=0)
    recalls = [c.recall for c in curves if not np.isnan(c.recall[0])]
    excluded = len(curves) - len(recalls)
    if excluded:
        logger.info("pr_curve: %d image(s) with empty ground truth left out of the recall average", excluded)
    recall = np.mean(recalls, axis=0) if recalls else np.zeros_like(precision)
    return PRCurve(THRESHOLDS.copy(), precision, recall)


def f_measure(precision, recall, eta2: float = ETA2):
    """(1 + eta2) P R / (eta2 P + R), zero where the denominator vanishes."""

    p = np.asarray(precision, dtype=np.float64)
    r = np.asarray(recall, dtype=np.float64)
    denominator = eta2 * p + r
    safe = np.where(denominator > 0, denominator, 1.0)
    value = np.where(denominator > 0, (1.0 + eta2) * p * r / safe, 0.0)
    return float(value) if value.ndim == 0 else value


def _binary_scores(binary: np.ndarray, gt: np.ndarray) -> Tuple[float, float]:
    fg = gt == 1
    tp = float(np.count_nonzero(binary & fg))
    predicted = float(np.count_nonzero(binary))
    positives = int(np.count_nonzero(fg))
    precision = float(_precision(np.array(tp), np.array(predicted)))
    if positives:
        recall = tp / positives
    else:
        # nothing to find: a clean prediction scores 1, any foreground scores 0
        recall = 1.0
    return precision, recall


def f_adaptive(pred, gt, eta2: float = ETA2) -> float:
    """F-measure at the adaptive threshold min(1, 2 * mean(pred))."""

    pred, gt = _pair(pred, gt)
    threshold = min(1.0, 2.0 * float(pred.mean()))
    binary = (pred >= threshold) & (pred > 0)
    return f_measure(*_binary_scores(binary, gt), eta2)


def f_max(pred, gt, eta2: float = ETA2) -> float:
    """Best F-measure of one image over the 256-threshold sweep."""

    curve = image_pr(pred, gt)
    # empty ground truth: recall counts as 1, same convention as _binary_scores
    recall = np.nan_to_num(curve.recall, nan=1.0)
    return float(np.max(f_measure(curve.precision, recall, eta2)))


def _map_values(x) -> np.ndarray:
    return x.values if isinstance(x, (SaliencyMap, GroundTruth)) else SaliencyMap(x).values


def mae(pred, gt) -> float:
    """Mean absolute difference; either argument may be a soft map."""

    a, b = _map_values(pred), _map_values(gt)
    if a.shape != b.shape:
        raise ShapeError(f"mae: maps {a.shape} and {b.shape} differ")
    return float(np.mean(np.abs(a - b)))


# S-measure ------------------------------------------------------------------

def _object_similarity(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    mean = float(values.mean())
    sigma = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return 2.0 * mean / (mean * mean + 1.0 + sigma + EPS)


def _special_case(pred: np.ndarray, gt: np.ndarray) -> float | None:
    fg_fraction = float(gt.mean())
    if fg_fraction == 0:
        return 1.0 - float(pred.mean())
    if fg_fraction == 1:
        return float(pred.mean())
    return None


def s_object(pred, gt) -> float:
    """Object-aware term: foreground and background similarity weighted by area."""

    pred, gt = _pair(pred, gt)
    special = _special_case(pred, gt)
    if special is not None:
        return special
    u = float(gt.mean())
    foreground = _object_similarity(pred[gt == 1])
    background = _object_similarity(1.0 - pred[gt == 0])
    return u * foreground + (1.0 - u) * background


def _centroid(gt: np.ndarray) -> Tuple[int, int]:
    h, w = gt.shape
    if not np.any(gt):
        return int(np.round(w / 2)) + 1, int(np.round(h / 2)) + 1
    y, x = np.argwhere(gt).mean(axis=0).round()
    return int(x) + 1, int(y) + 1


def _ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    x, y = float(pred.mean()), float(gt.mean())
    sigma_x = float(np.sum((pred - x) ** 2)) / (n - 1 + EPS)
    sigma_y = float(np.sum((gt - y) ** 2)) / (n - 1 + EPS)
    sigma_xy = float(np.sum((pred - x) * (gt - y))) / (n - 1 + EPS)
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def s_region(pred, gt) -> float:
    """Region-aware term: area-weighted SSIM over the four quadrants split at the GT centroid."""

    pred, gt = _pair(pred, gt)
    special = _special_case(pred, gt)
    if special is not None:
        return special
    h, w = gt.shape
    x, y = _centroid(gt)
    quadrants = (
        (slice(0, y), slice(0, x)),
        (slice(0, y), slice(x, w)),
        (slice(y, h), slice(0, x)),
        (slice(y, h), slice(x, w)),
    )
    score = 0.0
    for rows, cols in quadrants:
        part = gt[rows, cols]
        if part.size == 0:
            continue
        score += part.size / gt.size * _ssim(pred[rows, cols], part)
    return score


def s_measure(pred, gt, lam: float = S_LAMBDA) -> float:
    """lam * S_o + (1 - lam) * S_r, clamped to [0, 1]."""

    if not 0 <= lam <= 1:
        raise InputError(f"s_measure: lambda must lie in [0, 1], got {lam}")
    pred, gt = _pair(pred, gt)
    score = lam * s_object(pred, gt) + (1.0 - lam) * s_region(pred, gt)
    return float(min(1.0, max(0.0, score)))


__all__ = [
    "ETA2",
    "S_LAMBDA",
    "THRESHOLDS",
    "SaliencyMap",
    "GroundTruth",
    "PRCurve",
    "image_pr",
    "pr_curve",
    "f_measure",
    "f_adaptive",
    "f_max",
    "mae",
    "s_object",
    "s_region",
    "s_measure",
]
