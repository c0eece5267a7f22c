from qcnn_gait.layers.init import init_qconv
from qcnn_gait.layers.network import LayerSpec, Model, ModelSpec, build_network
from qcnn_gait.layers.presets import default_cnn_spec, default_qcnn_spec, small_qcnn_spec
from qcnn_gait.layers.qbatchnorm import QBatchNormState, qbatchnorm_forward
from qcnn_gait.layers.qconv import QConvParams, qconv_forward, qconv_window
from qcnn_gait.layers.readout import readout_magnitude, readout_real
from qcnn_gait.layers.real import (
    conv1d_forward,
    dense_forward,
    log_softmax_cross_entropy,
    relu,
)

__all__ = [
    "LayerSpec",
    "Model",
    "ModelSpec",
    "QBatchNormState",
    "QConvParams",
    "build_network",
    "conv1d_forward",
    "default_cnn_spec",
    "default_qcnn_spec",
    "dense_forward",
    "init_qconv",
    "log_softmax_cross_entropy",
    "qbatchnorm_forward",
    "qconv_forward",
    "qconv_window",
    "readout_magnitude",
    "readout_real",
    "relu",
    "small_qcnn_spec",
]
