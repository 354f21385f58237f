from __future__ import annotations

import numpy as np
import pytest

from pyamulet.batchnorm import BN_EPSILON, BatchNormState, batchnorm
from pyamulet.errors import ShapeError
from pyamulet.gradcheck import grad_check
from pyamulet.models import Mode
from pyamulet.tensor import Tensor, weighted_sum


def _affine(c: int) -> tuple[Tensor, Tensor]:
    gamma = Tensor(np.ones((1, c, 1, 1)), requires_grad=True)
    beta = Tensor(np.zeros((1, c, 1, 1)), requires_grad=True)
    return gamma, beta


def test_train_mode_normalizes_each_channel() -> None:
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(3.0, 2.0, size=(4, 3, 5, 5)))
    gamma, beta = _affine(3)
    out = batchnorm(x, gamma, beta, BatchNormState.fresh(3), Mode.TRAIN).data
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-3)


def test_train_mode_updates_running_statistics() -> None:
    rng = np.random.default_rng(1)
    data = rng.normal(1.0, 0.5, size=(2, 2, 3, 3))
    state = BatchNormState.fresh(2)
    gamma, beta = _affine(2)
    batchnorm(Tensor(data), gamma, beta, state, Mode.TRAIN)
    mean = data.mean(axis=(0, 2, 3))
    unbiased = data.var(axis=(0, 2, 3), ddof=1)
    np.testing.assert_allclose(state.running_mean, 0.1 * mean, rtol=1e-6)
    np.testing.assert_allclose(state.running_var, 0.9 + 0.1 * unbiased, rtol=1e-6)


def test_infer_mode_uses_running_statistics_only() -> None:
    rng = np.random.default_rng(2)
    data = rng.normal(size=(1, 2, 2, 2))
    state = BatchNormState(np.array([0.5, -1.0], dtype=np.float32), np.array([4.0, 0.25], dtype=np.float32))
    before = state.copy()
    gamma, beta = _affine(2)
    out = batchnorm(Tensor(data), gamma, beta, state, Mode.INFER).data
    expected = (data - before.running_mean.reshape(1, 2, 1, 1)) / np.sqrt(
        before.running_var.reshape(1, 2, 1, 1) + BN_EPSILON
    )
    np.testing.assert_allclose(out, expected, rtol=1e-6)
    np.testing.assert_array_equal(state.running_mean, before.running_mean)
    np.testing.assert_array_equal(state.running_var, before.running_var)


def test_single_element_batch_is_rejected_in_train_mode() -> None:
    gamma, beta = _affine(2)
    with pytest.raises(ShapeError):
        batchnorm(Tensor(np.zeros((1, 2, 1, 1))), gamma, beta, BatchNormState.fresh(2), Mode.TRAIN)


def test_parameter_dims_are_checked() -> None:
    gamma, beta = _affine(3)
    with pytest.raises(ShapeError, match="gamma"):
        batchnorm(Tensor(np.zeros((2, 2, 2, 2))), gamma, beta, BatchNormState.fresh(2))


@pytest.mark.parametrize("mode", [Mode.TRAIN, Mode.INFER])
def test_batchnorm_gradients(mode: Mode) -> None:
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((2, 3, 3, 3)), requires_grad=True)
    gamma = Tensor(rng.uniform(0.5, 1.5, size=(1, 3, 1, 1)), requires_grad=True)
    beta = Tensor(rng.standard_normal((1, 3, 1, 1)), requires_grad=True)
    state = BatchNormState(np.array([0.1, -0.2, 0.3], dtype=np.float32), np.array([1.5, 0.7, 2.0], dtype=np.float32))
    weights = rng.standard_normal(x.dims)

    def loss() -> Tensor:
        return weighted_sum(batchnorm(x, gamma, beta, state.copy(), mode), weights)

    assert grad_check(loss, [x, gamma, beta]) < 1e-6
