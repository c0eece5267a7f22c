"""Randomised equivariance, invariance and gradient checks behind ``check-equivariance``
and ``grad-check``."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from qcnn_gait.autodiff.gradcheck import gradient_check
from qcnn_gait.autodiff.tape import Variable
from qcnn_gait.data.cycles import rotate_samples
from qcnn_gait.layers.network import Model, build_network
from qcnn_gait.layers.presets import default_qcnn_spec, small_qcnn_spec
from qcnn_gait.layers.qbatchnorm import QBatchNormState, qbatchnorm_forward
from qcnn_gait.layers.qconv import QConvParams, RotationForm, qconv_forward
from qcnn_gait.quaternion.algebra import conjugation_rotate, random_unit_quaternion

logger = logging.getLogger(__name__)

LAYER_TOLERANCE = 1e-10
MODEL_TOLERANCE = 1e-8
GRADIENT_TOLERANCE = 1e-4

TAPS = (1, 3, 5, 7)
CHANNELS = (1, 2, 4)
PADDINGS = (0, 2)


@dataclass(frozen=True)
class CheckReport:
    name: str
    trials: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _random_params(
    rng: np.random.Generator,
    out_channels: int,
    in_channels: int,
    taps: int,
    *,
    stride: int = 1,
    padding: int = 0,
    rotation_form: RotationForm = "pivot",
) -> QConvParams:
    shape = (out_channels, in_channels, taps)
    return QConvParams(
        rng.normal(size=shape),
        rng.normal(size=shape),
        rng.normal(size=shape),
        stride,
        padding,
        rotation_form,
    )


def equivariance_deviation(
    params: QConvParams, x: NDArray[np.float64], r: NDArray[np.float64]
) -> float:
    """Max elementwise ``|r f(x) r^-1 - f(r x r^-1)|`` for one layer."""
    expected = conjugation_rotate(r, qconv_forward(x, params))
    actual = qconv_forward(conjugation_rotate(r, x), params)
    return float(np.max(np.abs(expected - actual)))


def check_layer_equivariance(
    trials: int, rng: np.random.Generator, rotation_form: RotationForm = "pivot"
) -> CheckReport:
    """Random layers cycling through every (taps, C_in, C_out, padding) combination."""
    grid = list(itertools.product(TAPS, CHANNELS, CHANNELS, PADDINGS))
    worst = 0.0
    for trial in range(trials):
        taps, c_in, c_out, padding = grid[trial % len(grid)]
        stride = int(rng.integers(1, 3))
        params = _random_params(
            rng, c_out, c_in, taps, stride=stride, padding=padding, rotation_form=rotation_form
        )
        length = taps + int(rng.integers(0, 7))
        x = rng.normal(0.0, 0.5, size=(2, c_in, length, 4))
        worst = max(worst, equivariance_deviation(params, x, random_unit_quaternion(rng)))
    logger.debug("Layer equivariance over %d trials: %.3g", trials, worst)
    return CheckReport(f"qconv ({rotation_form})", trials, worst, LAYER_TOLERANCE)


def check_batchnorm_composition(
    trials: int, rng: np.random.Generator, depth: int = 2
) -> CheckReport:
    """(qconv -> qbatchnorm)^depth in train mode commutes with rotation of the batch."""
    worst = 0.0
    for _ in range(trials):
        channels = [1, *rng.integers(1, 5, size=depth).tolist()]
        layers = [
            _random_params(rng, channels[k + 1], channels[k], 3, padding=1) for k in range(depth)
        ]
        x = rng.normal(0.0, 0.5, size=(3, 1, 12, 4))
        r = random_unit_quaternion(rng)

        def run(batch: NDArray[np.float64], layers: list[QConvParams] = layers) -> NDArray:
            for params in layers:
                state = QBatchNormState.fresh(params.out_channels)
                batch = qbatchnorm_forward(qconv_forward(batch, params), state)
            return batch

        deviation = np.max(np.abs(conjugation_rotate(r, run(x)) - run(conjugation_rotate(r, x))))
        worst = max(worst, float(deviation))
    return CheckReport(f"(qconv -> qbatchnorm)^{depth}", trials, worst, LAYER_TOLERANCE)


def logit_invariance_deviation(
    model: Model, cycles: NDArray[np.float64], r: NDArray[np.float64]
) -> float:
    """Max logit change under one rotation of every cycle, relative to the logit scale."""
    base = model.logits(cycles)
    rotated = model.logits(rotate_samples(cycles, r))
    scale = max(float(np.max(np.abs(base))), 1e-12)
    return float(np.max(np.abs(rotated - base))) / scale


def check_model_invariance(
    model: Model, rotations: int, rng: np.random.Generator, batch: int = 4
) -> CheckReport:
    cycles = rng.normal(size=(batch, model.spec.input_length, 3))
    worst = max(
        (
            logit_invariance_deviation(model, cycles, random_unit_quaternion(rng))
            for _ in range(rotations)
        ),
        default=0.0,
    )
    return CheckReport(f"{model.spec.name} logits", rotations, worst, MODEL_TOLERANCE)


def check_equivariance_suite(trials: int, seed: int) -> list[CheckReport]:
    """Layer equivariance (both rotation forms), batch-norm composition and model invariance."""
    rng = np.random.default_rng(seed)
    model = build_network(default_qcnn_spec(num_classes=10), rng)
    return [
        check_layer_equivariance(trials, rng, "pivot"),
        check_layer_equivariance(trials, rng, "literal"),
        check_batchnorm_composition(max(trials // 10, 1), rng),
        check_model_invariance(model, min(trials, 50), rng),
    ]


def model_gradient_error(
    model: Model, rng: np.random.Generator, batch: int = 4, h: float = 1e-6
) -> float:
    """Finite-difference check of the eval-mode loss w.r.t. every parameter of ``model``."""
    cycles = rng.normal(size=(batch, model.spec.input_length, 3))
    labels = rng.integers(0, model.num_classes, size=batch)

    def loss(flat: Variable) -> Variable:
        value, _ = model.loss(flat.tape, cycles, labels, training=False, flat=flat)
        return value

    return gradient_check(loss, model.get_flat_parameters(), h)


def grad_check_small_qcnn(seed: int, h: float = 1e-6) -> CheckReport:
    rng = np.random.default_rng(seed)
    model = build_network(small_qcnn_spec(), rng)
    error = model_gradient_error(model, rng, h=h)
    logger.debug("Gradient check over %d parameters: %.3g", model.parameter_count, error)
    return CheckReport("small-qcnn gradients", model.parameter_count, error, GRADIENT_TOLERANCE)

