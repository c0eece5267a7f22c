"""Parameter initialization.

Quaternion convolutions draw ``a`` from a He-style normal with fan-in ``L * C_in``,
``b ~ N(0, 1/4)`` to match the real-part variance of inputs distributed as
``N(0, I_4 / 4)``, and ``c ~ N(0, 1.3780^2 - 1/4)`` so that the real part of the rotation
factor ``q_l + c`` has variance ``1.3780^2`` and the induced rotation angles come out
roughly uniform on ``[0, 2 pi]``.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from qcnn_gait.layers.qconv import QConvParams
from qcnn_gait.quaternion.algebra import rotation_angle

ROTATION_REAL_STD = 1.3780
BIAS_VARIANCE = 0.25
ROTATION_OFFSET_VARIANCE = ROTATION_REAL_STD**2 - BIAS_VARIANCE


def he_std(fan_in: int) -> float:
    return float(np.sqrt(2.0 / fan_in))


def init_qconv(params: QConvParams, rng: np.random.Generator) -> QConvParams:
    """Return ``params`` with freshly drawn ``a``, ``b``, ``c`` (same geometry)."""
    shape = params.a.shape
    a = rng.normal(0.0, he_std(params.taps * params.in_channels), size=shape)
    b = rng.normal(0.0, np.sqrt(BIAS_VARIANCE), size=shape)
    c = rng.normal(0.0, np.sqrt(ROTATION_OFFSET_VARIANCE), size=shape)
    return QConvParams(a, b, c, params.stride, params.padding, params.rotation_form)


def init_conv1d(
    out_channels: int, in_channels: int, kernel: int, rng: np.random.Generator
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    weight = rng.normal(0.0, he_std(in_channels * kernel), size=(out_channels, in_channels, kernel))
    return weight, np.zeros(out_channels)


def init_dense(
    units: int, in_features: int, rng: np.random.Generator
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return rng.normal(0.0, he_std(in_features), size=(units, in_features)), np.zeros(units)


def simulate_rotation_angles(samples: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Rotation angles induced by freshly drawn ``c`` on pivots with ``|vector part|^2 = 3/4``.

    The pivot real part is drawn from ``N(0, 1/4)``; the vector magnitude is fixed at its
    expectation ``sqrt(3) / 2``, so only the real part of ``q_l + c`` varies.
    """
    pivot_real = rng.normal(0.0, np.sqrt(BIAS_VARIANCE), size=samples)
    offsets = rng.normal(0.0, np.sqrt(ROTATION_OFFSET_VARIANCE), size=samples)
    rotations = np.zeros((samples, 4))
    rotations[:, 0] = pivot_real + offsets
    rotations[:, 1] = np.sqrt(3.0) / 2.0
    return rotation_angle(rotations)
