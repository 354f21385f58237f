from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pyamulet.errors import InputError, ShapeError
from pyamulet.metrics import (
    THRESHOLDS,
    GroundTruth,
    SaliencyMap,
    f_adaptive,
    f_max,
    f_measure,
    image_pr,
    mae,
    pr_curve,
    s_measure,
    s_object,
    s_region,
)

unit_maps = arrays(np.float64, (6, 6), elements=st.floats(0.0, 1.0, allow_nan=False))


def _blob_gt(h: int = 16, w: int = 16) -> np.ndarray:
    gt = np.zeros((h, w))
    gt[4:10, 5:12] = 1
    return gt


def _noisy_prediction(gt: np.ndarray, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.clip(0.8 * gt + rng.uniform(0.0, 0.3, size=gt.shape), 0.0, 1.0)


@given(st.floats(0.0, 1.0))
def test_f_measure_fixed_point(p: float) -> None:
    assert abs(f_measure(p, p) - p) < 1e-12


def test_f_measure_examples() -> None:
    assert f_measure(1.0, 0.0) == 0.0
    assert f_measure(0.0, 0.0) == 0.0
    assert f_measure(0.8, 0.6) == pytest.approx(0.624 / 0.84, abs=1e-12)
    np.testing.assert_allclose(f_measure(np.array([0.5, 1.0]), np.array([0.5, 1.0])), [0.5, 1.0])


def test_mae_examples() -> None:
    gt = _blob_gt()
    assert mae(gt, gt) == 0.0
    assert mae(np.ones((4, 4)), np.zeros((4, 4))) == 1.0
    rng = np.random.default_rng(1)
    pred = rng.random((8, 8))
    binary = (rng.random((8, 8)) < 0.5).astype(float)
    assert mae(pred, binary) == pytest.approx(float(np.abs(pred - binary).sum() / 64), abs=1e-15)


@given(unit_maps, unit_maps)
def test_mae_is_symmetric(a: np.ndarray, b: np.ndarray) -> None:
    assert mae(a, b) == mae(b, a)


def test_perfect_prediction_pr() -> None:
    gt = _blob_gt()
    curve = image_pr(gt, gt)
    np.testing.assert_array_equal(curve.precision[:255], 1.0)
    np.testing.assert_array_equal(curve.recall[:255], 1.0)
    # nothing exceeds the top threshold, so nothing is predicted
    assert curve.recall[255] == 0.0
    assert curve.precision[255] == 1.0


def test_all_ones_prediction_pr() -> None:
    gt = _blob_gt()
    curve = image_pr(np.ones_like(gt), gt)
    np.testing.assert_array_equal(curve.recall[:255], 1.0)
    np.testing.assert_allclose(curve.precision[:255], gt.mean())


def test_pr_matches_exhaustive_count() -> None:
    rng = np.random.default_rng(2)
    pred = rng.integers(0, 256, size=(8, 8)) / 255.0
    gt = (rng.random((8, 8)) < 0.4).astype(float)
    curve = image_pr(pred, gt)
    for k in (0, 17, 128, 200, 254):
        binary = pred > k / 255.0
        tp = np.sum(binary & (gt == 1))
        predicted = np.sum(binary)
        expected_precision = tp / predicted if predicted else 1.0
        assert curve.precision[k] == pytest.approx(expected_precision, abs=1e-15)
        assert curve.recall[k] == pytest.approx(tp / gt.sum(), abs=1e-15)
    assert THRESHOLDS.shape == (256,)


@settings(max_examples=30)
@given(unit_maps, arrays(np.bool_, (6, 6)))
def test_recall_is_non_increasing(pred: np.ndarray, gt: np.ndarray) -> None:
    curve = image_pr(pred, gt.astype(float))
    if gt.any():
        assert np.all(np.diff(curve.recall) <= 0)
    else:
        assert np.all(np.isnan(curve.recall))


def test_pr_curve_skips_empty_ground_truth_in_recall() -> None:
    gt = _blob_gt()
    empty = np.zeros_like(gt)
    curve = pr_curve([gt, np.zeros_like(gt)], [gt, empty])
    np.testing.assert_array_equal(curve.recall[:255], 1.0)
    np.testing.assert_array_equal(curve.precision, 1.0)
    with pytest.raises(InputError):
        pr_curve([], [])


def test_f_adaptive_cases() -> None:
    gt = _blob_gt()
    assert f_adaptive(gt, gt) == 1.0
    assert f_adaptive(np.zeros_like(gt), gt) == 0.0
    assert f_adaptive(np.zeros_like(gt), np.zeros_like(gt)) == 1.0


def test_f_adaptive_matches_direct_computation() -> None:
    gt = _blob_gt()
    pred = _noisy_prediction(gt, seed=3)
    threshold = min(1.0, 2 * pred.mean())
    binary = pred >= threshold
    tp = np.sum(binary & (gt == 1))
    precision, recall = tp / binary.sum(), tp / gt.sum()
    expected = 1.3 * precision * recall / (0.3 * precision + recall)
    assert f_adaptive(pred, gt) == pytest.approx(expected, abs=1e-12)


def test_f_max_cases() -> None:
    gt = _blob_gt()
    assert f_max(gt, gt) == pytest.approx(1.0)
    assert f_max(np.zeros_like(gt), np.zeros_like(gt)) == 1.0
    pred = _noisy_prediction(gt)
    assert 0.0 < f_max(pred, gt) <= 1.0


def test_s_measure_perfect_and_constant() -> None:
    gt = _blob_gt()
    assert s_measure(gt, gt) == pytest.approx(1.0, abs=1e-6)
    constant = np.full_like(gt, gt.mean())
    assert s_measure(constant, gt) < s_measure(_noisy_prediction(gt), gt)


def test_s_measure_lambda_endpoints_and_linearity() -> None:
    gt = _blob_gt()
    pred = _noisy_prediction(gt, seed=4)
    assert s_measure(pred, gt, 0.0) == s_region(pred, gt)
    assert s_measure(pred, gt, 1.0) == pytest.approx(s_object(pred, gt), abs=1e-15)
    mid = s_measure(pred, gt, 0.5)
    assert mid == pytest.approx(0.5 * s_measure(pred, gt, 0.0) + 0.5 * s_measure(pred, gt, 1.0), abs=1e-12)
    with pytest.raises(InputError):
        s_measure(pred, gt, 1.5)


def test_s_measure_single_class_ground_truth() -> None:
    pred = np.full((4, 4), 0.25)
    assert s_measure(pred, np.zeros((4, 4))) == pytest.approx(0.75)
    assert s_measure(pred, np.ones((4, 4))) == pytest.approx(0.25)


def test_inputs_are_validated() -> None:
    gt = _blob_gt()
    with pytest.raises(InputError):
        s_measure(gt, np.full_like(gt, 0.5))
    with pytest.raises(InputError):
        SaliencyMap(np.full((2, 2), 1.5))
    with pytest.raises(ShapeError):
        f_adaptive(np.zeros((4, 4)), np.zeros((4, 5)))
    assert GroundTruth(np.ones((1, 3, 3))).values.shape == (3, 3)


def test_s_measure_agrees_with_pysodmetrics() -> None:
    py_sod_metrics = pytest.importorskip("py_sod_metrics")
    gt = _blob_gt(24, 20)
    rng = np.random.default_rng(5)
    pred = np.clip(0.7 * gt + rng.uniform(0.0, 0.4, size=gt.shape), 0.0, 1.0)
    pred[0, 0], pred[-1, -1] = 0.0, 1.0
    pred_u8 = np.rint(pred * 255).astype(np.uint8)
    metric = py_sod_metrics.Smeasure()
    metric.step(pred=pred_u8, gt=(gt * 255).astype(np.uint8))
    expected = float(metric.get_results()["sm"])
    assert s_measure(pred_u8 / 255.0, gt) == pytest.approx(expected, abs=1e-6)
