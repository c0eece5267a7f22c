"""Rotation-invariant readouts from quaternion features to real features."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.tape import Variable
from qcnn_gait.quaternion.algebra import as_quaternion, conjugate, magnitude


def readout_magnitude(x: ArrayLike) -> NDArray[np.float64]:
    """Elementwise ``|q|``."""
    return magnitude(x)


def readout_real(x: ArrayLike) -> NDArray[np.float64]:
    """Elementwise scalar part of ``(q + q*) / 2``."""
    q = as_quaternion(x)
    return ((q + conjugate(q)) / 2.0)[..., 0]


def record_readout(x: Variable, kind: str) -> Variable:
    if kind == "readout-magnitude":
        return ops.magnitude(x)
    if kind == "readout-real":
        return ops.real_part(x)
    raise ValueError(f"unknown readout kind: {kind}")
