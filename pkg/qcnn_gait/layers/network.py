"""Declarative layer stacks and the runtime model built from them."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Annotated, Literal, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import Field, field_validator

from qcnn_gait._base import StrictBaseModel
from qcnn_gait._exceptions import ConfigurationError, ContractViolation
from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.tape import Tape, Variable
from qcnn_gait.layers.init import init_conv1d, init_dense, init_qconv
from qcnn_gait.layers.qbatchnorm import QBatchNormState, qbatchnorm
from qcnn_gait.layers.qconv import DegeneracyCounter, QConvParams, output_length, qconv
from qcnn_gait.layers.readout import record_readout
from qcnn_gait.layers.real import conv1d
from qcnn_gait.quaternion.algebra import embed_pure

logger = logging.getLogger(__name__)


class QConvSpec(StrictBaseModel):
    kind: Literal["qconv"] = "qconv"
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    taps: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=0, ge=0)
    rotation_form: Literal["pivot", "literal"] = "pivot"

    @field_validator("taps")
    @classmethod
    def _validate_odd_taps(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("must be odd so the window has a pivot")
        return value

    @property
    def parameter_count(self) -> int:
        return 3 * self.taps * self.in_channels * self.out_channels


class QBatchNormSpec(StrictBaseModel):
    kind: Literal["qbatchnorm"] = "qbatchnorm"
    momentum: float = Field(default=0.1, gt=0.0, le=1.0)


class ReadoutSpec(StrictBaseModel):
    kind: Literal["readout-magnitude", "readout-real"] = "readout-magnitude"


class Conv1dSpec(StrictBaseModel):
    kind: Literal["conv1d"] = "conv1d"
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    kernel: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=0, ge=0)


class DenseSpec(StrictBaseModel):
    kind: Literal["dense"] = "dense"
    units: int = Field(ge=1)


class ReluSpec(StrictBaseModel):
    kind: Literal["relu"] = "relu"


LayerSpec = Annotated[
    QConvSpec | QBatchNormSpec | ReadoutSpec | Conv1dSpec | DenseSpec | ReluSpec,
    Field(discriminator="kind"),
]

QUATERNION_KINDS = {"qconv", "qbatchnorm"}
READOUT_KINDS = {"readout-magnitude", "readout-real"}


class ModelSpec(StrictBaseModel):
    """Layer list plus the input geometry it was designed for."""

    name: str = "model"
    input_length: int = Field(default=100, ge=1)
    num_classes: int = Field(ge=2)
    layers: list[LayerSpec] = Field(min_length=1)

    @property
    def is_quaternion(self) -> bool:
        return self.layers[0].kind in QUATERNION_KINDS


class Layer(Protocol):
    def parameters(self) -> dict[str, NDArray[np.float64]]: ...

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None: ...

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable: ...


class QConvLayer:
    def __init__(self, spec: QConvSpec, params: QConvParams) -> None:
        self.spec = spec
        self.params = params
        self.counter = DegeneracyCounter()

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {"a": self.params.a, "b": self.params.b, "c": self.params.c}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        self.params = QConvParams(
            values["a"],
            values["b"],
            values["c"],
            self.params.stride,
            self.params.padding,
            self.params.rotation_form,
        )

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        return qconv(
            x,
            params["a"],
            params["b"],
            params["c"],
            stride=self.spec.stride,
            padding=self.spec.padding,
            rotation_form=self.spec.rotation_form,
            counter=self.counter,
        )


class QBatchNormLayer:
    def __init__(self, spec: QBatchNormSpec, channels: int) -> None:
        self.spec = spec
        self.state = QBatchNormState.fresh(channels, spec.momentum)

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        pass

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        self.state.mode = "train" if training else "eval"
        return qbatchnorm(x, self.state)


class ReadoutLayer:
    def __init__(self, spec: ReadoutSpec) -> None:
        self.spec = spec

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        pass

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        return record_readout(x, self.spec.kind)


class Conv1dLayer:
    def __init__(
        self, spec: Conv1dSpec, weight: NDArray[np.float64], bias: NDArray[np.float64]
    ) -> None:
        self.spec = spec
        self.weight = weight
        self.bias = bias

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {"weight": self.weight, "bias": self.bias}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        self.weight = values["weight"]
        self.bias = values["bias"]

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        return conv1d(
            x, params["weight"], params["bias"], stride=self.spec.stride, padding=self.spec.padding
        )


class DenseLayer:
    def __init__(
        self, spec: DenseSpec, weight: NDArray[np.float64], bias: NDArray[np.float64]
    ) -> None:
        self.spec = spec
        self.weight = weight
        self.bias = bias

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {"weight": self.weight, "bias": self.bias}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        self.weight = values["weight"]
        self.bias = values["bias"]

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        if x.ndim > 2:
            x = ops.reshape(x, (x.shape[0], -1))
        return ops.add(ops.matvec(params["weight"], x), params["bias"])


class ReluLayer:
    def parameters(self) -> dict[str, NDArray[np.float64]]:
        return {}

    def set_parameters(self, values: dict[str, NDArray[np.float64]]) -> None:
        pass

    def forward(self, x: Variable, params: dict[str, Variable], *, training: bool) -> Variable:
        return ops.relu(x)


class Model:
    """Runtime network: ordered layers, flat parameter access, batch-norm state."""

    def __init__(self, spec: ModelSpec, layers: Sequence[Layer]) -> None:
        self.spec = spec
        self.layers = list(layers)

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def named_parameters(self) -> list[tuple[str, NDArray[np.float64]]]:
        return [
            (f"layer{index}.{name}", value)
            for index, layer in enumerate(self.layers)
            for name, value in layer.parameters().items()
        ]

    @property
    def parameter_count(self) -> int:
        return sum(value.size for _, value in self.named_parameters())

    def get_flat_parameters(self) -> NDArray[np.float64]:
        arrays = [value.ravel() for _, value in self.named_parameters()]
        return np.concatenate(arrays) if arrays else np.zeros(0)

    def set_flat_parameters(self, flat: ArrayLike) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise ContractViolation(
                f"expected {self.parameter_count} parameters, got shape {flat.shape}"
            )
        offset = 0
        for layer in self.layers:
            values = {}
            for name, value in layer.parameters().items():
                values[name] = flat[offset : offset + value.size].reshape(value.shape).copy()
                offset += value.size
            if values:
                layer.set_parameters(values)

    def batchnorm_states(self) -> list[QBatchNormState]:
        return [layer.state for layer in self.layers if isinstance(layer, QBatchNormLayer)]

    def get_batchnorm_mu(self) -> list[NDArray[np.float64]]:
        return [state.mu.copy() for state in self.batchnorm_states()]

    def set_batchnorm_mu(self, mus: Sequence[ArrayLike]) -> None:
        states = self.batchnorm_states()
        if len(mus) != len(states):
            raise ContractViolation(f"expected {len(states)} batch-norm states, got {len(mus)}")
        for state, mu in zip(states, mus, strict=True):
            mu = np.asarray(mu, dtype=np.float64)
            if mu.shape != state.mu.shape or np.any(mu <= 0):
                raise ContractViolation("batch-norm running RMS must match shape and be positive")
            state.mu = mu.copy()

    @property
    def degeneracy_count(self) -> int:
        return sum(layer.counter.count for layer in self.layers if isinstance(layer, QConvLayer))

    def prepare_inputs(self, cycles: ArrayLike) -> NDArray[np.float64]:
        """(B, T, 3) acceleration cycles to (B, 1, T, 4) quaternions or (B, 3, T) reals."""
        cycles = np.asarray(cycles, dtype=np.float64)
        if cycles.ndim != 3 or cycles.shape[1:] != (self.spec.input_length, 3):
            raise ContractViolation(
                f"expected cycles of shape (B, {self.spec.input_length}, 3), got {cycles.shape}"
            )
        if self.spec.is_quaternion:
            return embed_pure(cycles)[:, None]
        return np.ascontiguousarray(cycles.transpose(0, 2, 1))

    def forward(
        self,
        tape: Tape,
        cycles: ArrayLike,
        *,
        training: bool = False,
        flat: Variable | None = None,
        upto: int | None = None,
    ) -> tuple[Variable, list[Variable]]:
        """Record the forward pass; returns the output and the parameter variables used.

        With ``flat`` the parameters are sliced out of that single variable, otherwise one
        leaf per parameter array is created. ``upto`` stops after that many layers.
        """
        x = tape.constant(self.prepare_inputs(cycles))
        param_vars: list[Variable] = []
        offset = 0
        layers = self.layers if upto is None else self.layers[:upto]
        for layer in layers:
            params: dict[str, Variable] = {}
            for name, value in layer.parameters().items():
                if flat is None:
                    var = tape.variable(value)
                else:
                    piece = ops.take(flat, slice(offset, offset + value.size))
                    var = ops.reshape(piece, value.shape)
                offset += value.size
                params[name] = var
                param_vars.append(var)
            x = layer.forward(x, params, training=training)
        return x, param_vars

    def loss(
        self,
        tape: Tape,
        cycles: ArrayLike,
        labels: ArrayLike,
        *,
        training: bool = False,
        flat: Variable | None = None,
    ) -> tuple[Variable, list[Variable]]:
        logits, param_vars = self.forward(tape, cycles, training=training, flat=flat)
        return ops.cross_entropy(logits, labels), param_vars

    def logits(self, cycles: ArrayLike, batch_size: int = 256) -> NDArray[np.float64]:
        """Eval-mode logits, evaluated in fixed-size chunks."""
        cycles = np.asarray(cycles, dtype=np.float64)
        if len(cycles) == 0:
            return np.zeros((0, self.num_classes))
        chunks = []
        for start in range(0, len(cycles), batch_size):
            out, _ = self.forward(Tape(), cycles[start : start + batch_size], training=False)
            chunks.append(np.array(out.value))
        return np.concatenate(chunks)


def _fail(index: int, message: str) -> ConfigurationError:
    return ConfigurationError(f"layer {index}: {message}")


def validate_spec(spec: ModelSpec) -> list[tuple[int, int]]:
    """Walk the stack checking shapes; returns (channels, length) entering each layer."""
    quaternion = spec.is_quaternion
    channels = 1 if quaternion else 3
    length = spec.input_length
    features: int | None = None
    readouts = 0
    shapes: list[tuple[int, int]] = []

    for index, layer in enumerate(spec.layers):
        shapes.append((channels, length if features is None else features))
        kind = layer.kind
        if kind in QUATERNION_KINDS and not quaternion:
            raise _fail(index, f"{kind} needs quaternion input; it cannot follow a readout")
        if kind == "relu" and quaternion:
            raise _fail(
                index, "nonlinearity between quaternion layers would break rotation equivariance"
            )
        if isinstance(layer, QConvSpec):
            if layer.in_channels != channels:
                raise _fail(
                    index, f"qconv expects {layer.in_channels} channels, receives {channels}"
                )
            try:
                length = output_length(length, layer.taps, layer.stride, layer.padding)
            except ContractViolation as exc:
                raise _fail(index, str(exc)) from exc
            channels = layer.out_channels
        elif kind in READOUT_KINDS:
            if not quaternion:
                raise _fail(index, "readout needs quaternion input")
            quaternion = False
            readouts += 1
        elif isinstance(layer, Conv1dSpec):
            if features is not None:
                raise _fail(index, "conv1d cannot follow a dense layer")
            if layer.in_channels != channels:
                raise _fail(
                    index, f"conv1d expects {layer.in_channels} channels, receives {channels}"
                )
            try:
                length = output_length(length, layer.kernel, layer.stride, layer.padding)
            except ContractViolation as exc:
                raise _fail(index, str(exc)) from exc
            channels = layer.out_channels
        elif isinstance(layer, DenseSpec):
            features = layer.units

    if spec.is_quaternion and readouts != 1:
        raise ConfigurationError("quaternion layers must be followed by exactly one readout")
    if features is None or not isinstance(spec.layers[-1], DenseSpec):
        raise ConfigurationError("the stack must end in a dense layer producing class logits")
    if features != spec.num_classes:
        raise ConfigurationError(
            f"final dense layer has {features} units but the model has {spec.num_classes} classes"
        )
    return shapes


def build_network(spec: ModelSpec, rng: np.random.Generator) -> Model:
    """Validate ``spec`` and build a freshly initialised model."""
    shapes = validate_spec(spec)
    layers: list[Layer] = []
    for index, layer_spec in enumerate(spec.layers):
        channels, _ = shapes[index]
        if isinstance(layer_spec, QConvSpec):
            zeros = QConvParams.zeros(
                layer_spec.out_channels,
                layer_spec.in_channels,
                layer_spec.taps,
                stride=layer_spec.stride,
                padding=layer_spec.padding,
                rotation_form=layer_spec.rotation_form,
            )
            layers.append(QConvLayer(layer_spec, init_qconv(zeros, rng)))
        elif isinstance(layer_spec, QBatchNormSpec):
            layers.append(QBatchNormLayer(layer_spec, channels))
        elif isinstance(layer_spec, ReadoutSpec):
            layers.append(ReadoutLayer(layer_spec))
        elif isinstance(layer_spec, Conv1dSpec):
            weight, bias = init_conv1d(
                layer_spec.out_channels, layer_spec.in_channels, layer_spec.kernel, rng
            )
            layers.append(Conv1dLayer(layer_spec, weight, bias))
        elif isinstance(layer_spec, DenseSpec):
            weight, bias = init_dense(
                layer_spec.units, _incoming_features(spec, shapes, index), rng
            )
            layers.append(DenseLayer(layer_spec, weight, bias))
        else:
            layers.append(ReluLayer())

    model = Model(spec, layers)
    logger.debug("Built %s with %d parameters", spec.name, model.parameter_count)
    return model


def _incoming_features(spec: ModelSpec, shapes: list[tuple[int, int]], index: int) -> int:
    channels, length = shapes[index]
    for previous in reversed(spec.layers[:index]):
        if isinstance(previous, DenseSpec):
            return previous.units
    return channels * length
