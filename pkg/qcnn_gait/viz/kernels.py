"""Trajectory fragments that maximally activate first-layer quaternion kernels."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import ConfigurationError, VisualizationError
from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.tape import Tape
from qcnn_gait.layers.network import Model, QConvLayer
from qcnn_gait.layers.qconv import QConvParams, qconv, qconv_forward, qconv_window
from qcnn_gait.quaternion.algebra import embed_pure

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 2000
DEFAULT_STEP_SIZE = 0.05
MIN_STEP_SIZE = 1e-12


@dataclass(frozen=True, eq=False)
class TrajectoryFragment:
    """Optimised window (L, 3) and the filter output it produces."""

    layer: int
    out_channel: int
    points: NDArray[np.float64]
    output_vector: NDArray[np.float64]
    output_real: float
    activation: float
    flat_landscape: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "kernel": {"layer": self.layer, "out_channel": self.out_channel},
            "points": self.points.tolist(),
            "output_vector": self.output_vector.tolist(),
            "output_real": self.output_real,
            "activation": self.activation,
        }


@dataclass(frozen=True, eq=False)
class KernelTrace:
    """Per-position output of one filter slid over a cycle."""

    layer: int
    out_channel: int
    real: NDArray[np.float64]
    vector: NDArray[np.float64]
    magnitude: NDArray[np.float64]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kernel": {"layer": self.layer, "out_channel": self.out_channel},
            "real": self.real.tolist(),
            "vector": self.vector.tolist(),
            "magnitude": self.magnitude.tolist(),
        }


def kernel_params(model: Model, layer: int, out_channel: int) -> QConvParams:
    """Parameters of a single filter of a single-input-channel qconv layer."""
    if not 0 <= layer < len(model.layers) or not isinstance(model.layers[layer], QConvLayer):
        raise ConfigurationError(f"layer {layer} is not a qconv layer")
    params = model.layers[layer].params
    if params.in_channels != 1:
        raise ConfigurationError(
            f"layer {layer} has {params.in_channels} input channels; "
            "only single-channel (first) layers can be visualised"
        )
    if not 0 <= out_channel < params.out_channels:
        raise ConfigurationError(
            f"out_channel {out_channel} outside [0, {params.out_channels}) for layer {layer}"
        )
    pick = slice(out_channel, out_channel + 1)
    return QConvParams(
        params.a[pick],
        params.b[pick],
        params.c[pick],
        params.stride,
        params.padding,
        params.rotation_form,
    )


def window_output(params: QConvParams, points: ArrayLike) -> NDArray[np.float64]:
    """Filter output quaternion for a window of (L, 3) points."""
    return qconv_window(
        embed_pure(points),
        params.a[0, 0],
        params.b[0, 0],
        params.c[0, 0],
        rotation_form=params.rotation_form,
    )


def _project(points: NDArray[np.float64]) -> NDArray[np.float64]:
    rms = np.sqrt(np.mean(np.sum(points * points, axis=1)))
    if not np.isfinite(rms) or rms == 0.0:
        raise VisualizationError(f"cannot project a window with RMS {rms} onto RMS = 1")
    return points / rms


def _activation_and_gradient(
    params: QConvParams, points: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    tape = Tape()
    v = tape.variable(points)
    window = ops.reshape(ops.embed_pure(v), (1, 1, points.shape[0], 4))
    out = qconv(
        window,
        tape.constant(params.a),
        tape.constant(params.b),
        tape.constant(params.c),
        rotation_form=params.rotation_form,
    )
    activation = ops.sum(ops.magnitude(out))
    grads = tape.backward(activation)
    return float(activation.value), np.array(grads[v])


def maximize_kernel_activation(
    model: Model,
    layer: int,
    out_channel: int,
    seed: int,
    *,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
) -> TrajectoryFragment:
    """Projected gradient ascent on the output magnitude over windows with RMS 1.

    A step that lowers the activation is retried at half the step size, so the returned
    activation is never below that of the seed window.

    Raises:
        VisualizationError: If the ascent produces non-finite values.
    """
    params = kernel_params(model, layer, out_channel)
    rng = np.random.default_rng(seed)
    points = _project(rng.normal(size=(params.taps, 3)))
    activation, grad = _activation_and_gradient(params, points)

    flat = not np.any(grad)
    if flat:
        logger.warning(
            "Kernel %d of layer %d has a flat activation landscape at the seed window",
            out_channel,
            layer,
        )
    else:
        size = step_size
        for _ in range(steps):
            candidate = _project(points + size * grad)
            cand_activation, cand_grad = _activation_and_gradient(params, candidate)
            if not (np.isfinite(cand_activation) and np.isfinite(cand_grad).all()):
                raise VisualizationError(
                    f"non-finite activation during ascent (layer {layer}, kernel {out_channel})"
                )
            if cand_activation >= activation:
                points, activation, grad = candidate, cand_activation, cand_grad
            else:
                size *= 0.5
                if size < MIN_STEP_SIZE:
                    logger.debug("Ascent for kernel %d converged early", out_channel)
                    break

    output = window_output(params, points)
    if not np.isfinite(output).all():
        raise VisualizationError(f"non-finite output for kernel {out_channel} of layer {layer}")
    return TrajectoryFragment(
        layer=layer,
        out_channel=out_channel,
        points=points,
        output_vector=output[1:].copy(),
        output_real=float(output[0]),
        activation=float(np.sqrt(output @ output)),
        flat_landscape=flat,
    )


def apply_kernel_trace(
    model: Model, layer: int, out_channel: int, cycle: ArrayLike
) -> KernelTrace:
    """Slide one filter over a (T, 3) cycle and split each output quaternion."""
    params = kernel_params(model, layer, out_channel)
    cycle = np.asarray(cycle, dtype=np.float64)
    if cycle.ndim != 2 or cycle.shape[1] != 3:
        raise ConfigurationError(f"cycle must be (T, 3), got {cycle.shape}")
    out = qconv_forward(embed_pure(cycle)[None], params)[0]
    return KernelTrace(
        layer=layer,
        out_channel=out_channel,
        real=out[:, 0].copy(),
        vector=out[:, 1:].copy(),
        magnitude=np.sqrt(np.einsum("nk,nk->n", out, out)),
    )


def visualize_kernels(
    model: Model,
    layer: int,
    seed: int,
    *,
    channels: list[int] | None = None,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
    max_workers: int | None = None,
) -> list[TrajectoryFragment]:
    """Optimise every requested kernel from the same seed; results are in channel order."""
    kernel_params(model, layer, 0)
    if channels is None:
        channels = list(range(model.layers[layer].params.out_channels))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(
            pool.map(
                lambda channel: maximize_kernel_activation(
                    model, layer, channel, seed, steps=steps, step_size=step_size
                ),
                channels,
            )
        )


def build_document(
    checkpoint: str,
    layer: int,
    seed: int,
    fragments: list[TrajectoryFragment],
    traces: list[KernelTrace] | None = None,
) -> dict[str, Any]:
    document: dict[str, Any] = {
        "checkpoint": checkpoint,
        "layer": layer,
        "seed": seed,
        "fragments": [fragment.to_dict() for fragment in fragments],
    }
    if traces is not None:
        document["traces"] = [trace.to_dict() for trace in traces]
    return document


def write_document(document: dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2) + "\n")
    return path
