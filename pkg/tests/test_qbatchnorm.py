from __future__ import annotations

import numpy as np
import pytest

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.tape import Tape
from qcnn_gait.layers.qbatchnorm import (
    QBatchNormState,
    channel_rms,
    qbatchnorm,
    qbatchnorm_forward,
    update_running_rms,
)
from qcnn_gait.quaternion.algebra import conjugation_rotate, magnitude, random_unit_quaternion


def test_single_batch_with_full_momentum_normalises_exactly() -> None:
    batch = np.ones((3, 1, 5, 4))
    state = QBatchNormState.fresh(1, epsilon=1.0)

    out = qbatchnorm_forward(batch, state)

    np.testing.assert_array_equal(state.mu, [2.0])
    np.testing.assert_array_equal(magnitude(out), np.ones((3, 1, 5)))


def test_eval_mode_divides_by_stored_rms_without_updating() -> None:
    state = QBatchNormState(mu=np.array([2.0]), mode="eval")
    batch = np.array([0.0, 2.0, 0.0, 0.0]).reshape(1, 1, 1, 4)

    out = qbatchnorm_forward(batch, state)

    np.testing.assert_array_equal(out.reshape(4), [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(state.mu, [2.0])


def test_full_momentum_gives_unit_rms_per_channel() -> None:
    rng = np.random.default_rng(0)
    batch = rng.normal(size=(6, 3, 11, 4)) * np.array([0.1, 1.0, 25.0])[None, :, None, None]
    state = QBatchNormState.fresh(3, epsilon=1.0)

    out = qbatchnorm_forward(batch, state)

    np.testing.assert_allclose(channel_rms(out), 1.0, rtol=1e-9)


def test_running_rms_moves_by_momentum() -> None:
    batch = np.zeros((2, 2, 4, 4))
    batch[..., 0] = 3.0
    state = QBatchNormState.fresh(2, epsilon=0.1)

    update_running_rms(state, batch)

    np.testing.assert_allclose(state.mu, [0.9 + 0.3, 0.9 + 0.3])


def test_all_zero_channel_keeps_its_estimate() -> None:
    batch = np.zeros((2, 2, 4, 4))
    batch[:, 1] = 1.0
    state = QBatchNormState(mu=np.array([0.7, 1.0]), epsilon=0.5)

    out = qbatchnorm_forward(batch, state)

    assert state.mu[0] == 0.7
    assert state.mu[1] == pytest.approx(0.5 + 0.5 * 2.0)
    assert state.skipped_updates == 1
    np.testing.assert_array_equal(out[:, 0], 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mu": np.ones(2), "epsilon": 0.0},
        {"mu": np.ones(2), "epsilon": 1.5},
        {"mu": np.array([1.0, 0.0])},
        {"mu": np.array([1.0, -2.0])},
    ],
)
def test_invalid_state_is_rejected(kwargs: dict) -> None:
    with pytest.raises(ContractViolation):
        QBatchNormState(**kwargs)


def test_batch_shape_is_checked() -> None:
    state = QBatchNormState.fresh(2)

    with pytest.raises(ContractViolation):
        qbatchnorm_forward(np.ones((2, 3, 4, 4)), state)
    with pytest.raises(ContractViolation):
        qbatchnorm_forward(np.ones((0, 2, 4, 4)), state)
    state.mode = "eval"
    with pytest.raises(ContractViolation):
        qbatchnorm_forward(np.ones((2, 3, 4, 4)), state)


def test_rotating_the_batch_rotates_the_output() -> None:
    rng = np.random.default_rng(1)
    batch = rng.normal(size=(4, 3, 9, 4))
    r = random_unit_quaternion(rng)
    plain, rotated = QBatchNormState.fresh(3), QBatchNormState.fresh(3)

    expected = conjugation_rotate(r, qbatchnorm_forward(batch, plain))
    actual = qbatchnorm_forward(conjugation_rotate(r, batch), rotated)

    np.testing.assert_allclose(rotated.mu, plain.mu, rtol=1e-12)
    assert np.max(np.abs(expected - actual)) <= 1e-12


def test_running_rms_is_not_differentiated_through() -> None:
    rng = np.random.default_rng(2)
    value = rng.normal(size=(2, 3, 5, 4))
    state = QBatchNormState.fresh(3, epsilon=0.5)
    tape = Tape()
    x = tape.variable(value)

    out = qbatchnorm(x, state)
    grads = tape.backward(ops.sum(out))

    expected = np.broadcast_to((1.0 / state.mu)[None, :, None, None], value.shape)
    np.testing.assert_allclose(grads[x], expected, rtol=1e-15)
