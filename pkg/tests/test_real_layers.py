from __future__ import annotations

import numpy as np
import pytest

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.gradcheck import gradient_check
from qcnn_gait.autodiff.tape import Variable
from qcnn_gait.layers.real import (
    conv1d,
    conv1d_forward,
    dense_forward,
    log_softmax,
    log_softmax_cross_entropy,
    relu,
)


def _loop_conv1d(x, weight, bias, stride, padding):
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    batch, _, length = xp.shape
    out_channels, _, kernel = weight.shape
    n_out = (length - kernel) // stride + 1
    out = np.zeros((batch, out_channels, n_out))
    for b in range(batch):
        for o in range(out_channels):
            for t in range(n_out):
                window = xp[b, :, t * stride : t * stride + kernel]
                out[b, o, t] = np.sum(window * weight[o]) + bias[o]
    return out


def test_relu_example() -> None:
    np.testing.assert_array_equal(relu([-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])


def test_dense_with_identity_weights_is_identity() -> None:
    x = np.random.default_rng(0).normal(size=(4, 6))

    np.testing.assert_array_equal(dense_forward(x, np.eye(6), np.zeros(6)), x)


def test_dense_feature_mismatch_is_a_contract_violation() -> None:
    with pytest.raises(ContractViolation):
        dense_forward(np.ones((2, 5)), np.eye(6), np.zeros(6))


def test_uniform_logits_cross_entropy_is_log_ten() -> None:
    assert log_softmax_cross_entropy(np.zeros(10), [3]) == pytest.approx(2.302585, abs=1e-6)


def test_log_softmax_is_stable_for_large_logits() -> None:
    out = log_softmax([1000.0, 1000.0, -1000.0])

    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[:2], np.log(0.5), rtol=1e-12)


def test_cross_entropy_label_count_must_match() -> None:
    with pytest.raises(ContractViolation):
        log_softmax_cross_entropy(np.zeros((3, 4)), [0, 1])


@pytest.mark.parametrize("stride, padding", [(1, 0), (1, 2), (2, 1), (3, 2)])
def test_conv1d_matches_explicit_loop(stride: int, padding: int) -> None:
    rng = np.random.default_rng(stride * 10 + padding)
    x = rng.normal(size=(2, 3, 17))
    weight = rng.normal(size=(4, 3, 5))
    bias = rng.normal(size=4)

    out = conv1d_forward(x, weight, bias, stride=stride, padding=padding)

    np.testing.assert_allclose(
        out, _loop_conv1d(x, weight, bias, stride, padding), rtol=1e-12, atol=1e-12
    )


def test_conv1d_rejects_channel_mismatch() -> None:
    with pytest.raises(ContractViolation):
        conv1d_forward(np.ones((1, 2, 8)), np.ones((3, 4, 3)), np.zeros(3))


def test_conv1d_gradient_wrt_inputs_and_parameters() -> None:
    rng = np.random.default_rng(7)
    x_shape, w_shape = (2, 2, 9), (3, 2, 3)
    sizes = [int(np.prod(x_shape)), int(np.prod(w_shape)), 3]
    bounds = np.cumsum([0, *sizes])
    point = rng.uniform(0.5, 1.5, size=bounds[-1]) * rng.choice([-1.0, 1.0], size=bounds[-1])

    def f(theta: Variable) -> Variable:
        x, w, bias = (ops.take(theta, slice(bounds[k], bounds[k + 1])) for k in range(3))
        out = conv1d(
            ops.reshape(x, x_shape), ops.reshape(w, w_shape), bias, stride=2, padding=1
        )
        return ops.sum(ops.square(out))

    assert gradient_check(f, point, 1e-6) < 1e-5
