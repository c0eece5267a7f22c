"""Real-valued layers used by the classifier head and the baseline CNN."""

from __future__ import annotations

from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff.primitives import Primitive
from qcnn_gait.autodiff.tape import Variable
from qcnn_gait.layers.qconv import output_length


def _windows(
    x: NDArray[np.float64], kernel: int, stride: int, padding: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    return xp, sliding_window_view(xp, kernel, axis=2)[:, :, ::stride]


def _conv1d_forward(
    x: NDArray[np.float64],
    weight: NDArray[np.float64],
    bias: NDArray[np.float64],
    *,
    stride: int,
    padding: int,
) -> tuple[NDArray[np.float64], Any]:
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ContractViolation(f"conv1d shapes incompatible: x{x.shape} W{weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ContractViolation(f"conv1d bias must be ({weight.shape[0]},), got {bias.shape}")
    kernel = weight.shape[2]
    output_length(x.shape[2], kernel, stride, padding)
    xp, windows = _windows(x, kernel, stride, padding)
    out = np.einsum("bcnk,ock->bon", windows, weight) + bias[None, :, None]
    return out, (x.shape, xp.shape, windows, weight, stride, padding)


def _conv1d_backward(grad: NDArray[np.float64], saved: Any) -> tuple[NDArray[np.float64], ...]:
    x_shape, xp_shape, windows, weight, stride, padding = saved
    kernel = weight.shape[2]
    n_out = grad.shape[2]
    grad_w = np.einsum("bon,bcnk->ock", grad, windows)
    grad_bias = grad.sum(axis=(0, 2))
    grad_windows = np.einsum("bon,ock->bcnk", grad, weight)
    grad_xp = np.zeros(xp_shape)
    span = stride * (n_out - 1) + 1
    for k in range(kernel):
        grad_xp[:, :, k : k + span : stride] += grad_windows[..., k]
    grad_x = grad_xp[:, :, padding : padding + x_shape[2]]
    return grad_x, grad_w, grad_bias


CONV1D = Primitive("conv1d", _conv1d_forward, _conv1d_backward)


def conv1d(
    x: Variable, weight: Variable, bias: Variable, *, stride: int = 1, padding: int = 0
) -> Variable:
    """Record a real 1-D convolution on ``x`` of shape (B, C_in, n)."""
    return x.tape.record(CONV1D, x, weight, bias, stride=stride, padding=padding)


def conv1d_forward(
    x: ArrayLike,
    weight: ArrayLike,
    bias: ArrayLike,
    *,
    stride: int = 1,
    padding: int = 0,
) -> NDArray[np.float64]:
    out, _ = _conv1d_forward(
        np.asarray(x, dtype=np.float64),
        np.asarray(weight, dtype=np.float64),
        np.asarray(bias, dtype=np.float64),
        stride=stride,
        padding=padding,
    )
    return out


def dense_forward(x: ArrayLike, weight: ArrayLike, bias: ArrayLike) -> NDArray[np.float64]:
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if x.shape[-1] != weight.shape[1]:
        raise ContractViolation(f"dense expects {weight.shape[1]} features, got {x.shape[-1]}")
    return x @ weight.T + np.asarray(bias, dtype=np.float64)


def relu(x: ArrayLike) -> NDArray[np.float64]:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def log_softmax(logits: ArrayLike) -> NDArray[np.float64]:
    logits = np.asarray(logits, dtype=np.float64)
    return logits - logsumexp(logits, axis=-1, keepdims=True)


def log_softmax_cross_entropy(logits: ArrayLike, labels: ArrayLike) -> float:
    """Mean cross-entropy of (B, K) logits against integer labels."""
    logp = log_softmax(np.atleast_2d(logits))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (logp.shape[0],):
        raise ContractViolation(f"{logp.shape[0]} logit rows but {labels.shape[0]} labels")
    return float(-logp[np.arange(logp.shape[0]), labels].mean())
