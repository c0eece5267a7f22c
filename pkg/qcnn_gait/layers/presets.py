"""Named model specs used by the experiments and the CLI."""

from __future__ import annotations

from qcnn_gait._exceptions import ConfigurationError
from qcnn_gait.layers.network import (
    Conv1dSpec,
    DenseSpec,
    ModelSpec,
    QBatchNormSpec,
    QConvSpec,
    ReadoutSpec,
    ReluSpec,
)

HIDDEN_UNITS = 64


def default_qcnn_spec(num_classes: int, input_length: int = 100) -> ModelSpec:
    """Four qconv layers with batch norm, magnitude readout and a two-layer dense head.

    Batch norm follows every qconv, the two strided ones included. Each qconv raises the
    quaternion degree of its input, and normalising after the last two keeps the readout
    magnitudes in range.
    """
    return ModelSpec(
        name="qcnn",
        input_length=input_length,
        num_classes=num_classes,
        layers=[
            QConvSpec(in_channels=1, out_channels=8, taps=7, padding=3),
            QBatchNormSpec(),
            QConvSpec(in_channels=8, out_channels=16, taps=7, padding=3),
            QBatchNormSpec(),
            QConvSpec(in_channels=16, out_channels=16, taps=5, stride=2, padding=2),
            QBatchNormSpec(),
            QConvSpec(in_channels=16, out_channels=16, taps=5, stride=2, padding=2),
            QBatchNormSpec(),
            ReadoutSpec(kind="readout-magnitude"),
            DenseSpec(units=HIDDEN_UNITS),
            ReluSpec(),
            DenseSpec(units=num_classes),
        ],
    )


def default_cnn_spec(num_classes: int, input_length: int = 100) -> ModelSpec:
    """Real-valued baseline mirroring the QCNN layer for layer on 3-channel input."""
    return ModelSpec(
        name="cnn",
        input_length=input_length,
        num_classes=num_classes,
        layers=[
            Conv1dSpec(in_channels=3, out_channels=8, kernel=7, padding=3),
            ReluSpec(),
            Conv1dSpec(in_channels=8, out_channels=16, kernel=7, padding=3),
            ReluSpec(),
            Conv1dSpec(in_channels=16, out_channels=16, kernel=5, stride=2, padding=2),
            ReluSpec(),
            Conv1dSpec(in_channels=16, out_channels=16, kernel=5, stride=2, padding=2),
            ReluSpec(),
            DenseSpec(units=HIDDEN_UNITS),
            ReluSpec(),
            DenseSpec(units=num_classes),
        ],
    )


def small_qcnn_spec(num_classes: int = 3, input_length: int = 16) -> ModelSpec:
    """Two qconv layers and a dense head; small enough for a full finite-difference check."""
    return ModelSpec(
        name="small-qcnn",
        input_length=input_length,
        num_classes=num_classes,
        layers=[
            QConvSpec(in_channels=1, out_channels=2, taps=3, padding=1),
            QConvSpec(in_channels=2, out_channels=3, taps=3, stride=2, padding=1),
            ReadoutSpec(kind="readout-magnitude"),
            DenseSpec(units=num_classes),
        ],
    )


PRESETS = {
    "qcnn": default_qcnn_spec,
    "cnn": default_cnn_spec,
    "small-qcnn": small_qcnn_spec,
}


def preset_spec(name: str, num_classes: int, input_length: int = 100) -> ModelSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model preset {name!r}; expected one of {', '.join(PRESETS)}"
        ) from None
    return factory(num_classes, input_length)
