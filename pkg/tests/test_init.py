from __future__ import annotations

import numpy as np
from scipy.stats import kstest, norm

from qcnn_gait.layers.init import (
    BIAS_VARIANCE,
    ROTATION_OFFSET_VARIANCE,
    ROTATION_REAL_STD,
    he_std,
    init_conv1d,
    init_dense,
    init_qconv,
    simulate_rotation_angles,
)
from qcnn_gait.layers.qbatchnorm import channel_rms
from qcnn_gait.layers.qconv import QConvParams, qconv_forward


def test_rotation_offset_variance_constant() -> None:
    assert abs(ROTATION_OFFSET_VARIANCE - 1.64889) < 1e-5


def test_qconv_parameter_variances() -> None:
    params = init_qconv(QConvParams.zeros(100, 100, 11), np.random.default_rng(0))

    assert params.b.size == 110_000
    assert abs(params.b.var() / BIAS_VARIANCE - 1.0) < 0.02
    assert abs(params.c.var() / ROTATION_OFFSET_VARIANCE - 1.0) < 0.02
    assert abs(params.a.var() / he_std(11 * 100) ** 2 - 1.0) < 0.02


def test_init_keeps_geometry_and_is_reproducible() -> None:
    template = QConvParams.zeros(3, 2, 5, stride=2, padding=1, rotation_form="literal")

    first = init_qconv(template, np.random.default_rng(4))
    second = init_qconv(template, np.random.default_rng(4))

    assert (first.stride, first.padding, first.rotation_form) == (2, 1, "literal")
    np.testing.assert_array_equal(first.c, second.c)


def test_real_layer_init_shapes() -> None:
    rng = np.random.default_rng(1)

    weight, bias = init_conv1d(8, 3, 7, rng)
    dense_w, dense_b = init_dense(10, 64, rng)

    assert weight.shape == (8, 3, 7) and bias.shape == (8,)
    assert dense_w.shape == (10, 64) and dense_b.shape == (10,)
    np.testing.assert_array_equal(bias, 0.0)


def _predicted_angle_cdf(theta: np.ndarray) -> np.ndarray:
    # angle <= theta exactly when the rotation real part exceeds |v| cot(theta / 2)
    with np.errstate(divide="ignore"):
        threshold = np.sqrt(0.75) / np.tan(theta / 2.0)
    return norm.sf(threshold / ROTATION_REAL_STD)


def test_induced_rotation_angles_are_roughly_uniform() -> None:
    angles = simulate_rotation_angles(100_000, np.random.default_rng(2))

    assert angles.min() >= 0.0 and angles.max() <= 2.0 * np.pi
    # the fixed constant leaves a residual distance of about 0.074 from uniform
    assert kstest(angles, "uniform", args=(0.0, 2.0 * np.pi)).statistic < 0.08
    assert kstest(angles, _predicted_angle_cdf).statistic < 0.02


def test_fresh_qconv_outputs_are_near_normalised() -> None:
    rng = np.random.default_rng(3)
    template = QConvParams.zeros(4, 4, 5, padding=2)
    in_band = []

    for _ in range(100):
        params = init_qconv(template, rng)
        x = rng.normal(0.0, 0.5, size=(8, 4, 32, 4))
        rms = channel_rms(qconv_forward(x, params))
        in_band.extend((rms >= 0.3) & (rms <= 3.0))

    assert np.mean(in_band) >= 0.95
