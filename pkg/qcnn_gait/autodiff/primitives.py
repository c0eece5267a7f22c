"""Differentiable primitives.

A primitive is a pair of pure functions: ``forward(*values, **attrs) -> (value, saved)``
and ``backward(grad, saved) -> per-input gradients``. ``saved`` holds whatever the
backward rule needs; the tape stores it next to the node.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.quaternion.algebra import conjugate, hamilton_product, inverse

Array = NDArray[np.float64]
ForwardFn = Callable[..., tuple[Array, Any]]
BackwardFn = Callable[[Array, Any], Sequence[Array | None]]


@dataclass(frozen=True)
class Primitive:
    """Named differentiable operation recorded on a tape."""

    name: str
    forward: ForwardFn
    backward: BackwardFn


def unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(*shapes: tuple[int, ...]) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as exc:
        raise ContractViolation(f"shapes {shapes} do not broadcast") from exc


def _require_quaternion(name: str, *arrays: Array) -> None:
    for arr in arrays:
        if arr.shape[-1:] != (4,):
            raise ContractViolation(f"{name} expects trailing axis of length 4, got {arr.shape}")


# elementwise


def _add_forward(x: Array, y: Array) -> tuple[Array, Any]:
    _broadcast_shape(x.shape, y.shape)
    return x + y, (x.shape, y.shape)


def _add_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    x_shape, y_shape = saved
    return unbroadcast(grad, x_shape), unbroadcast(grad, y_shape)


def _sub_forward(x: Array, y: Array) -> tuple[Array, Any]:
    _broadcast_shape(x.shape, y.shape)
    return x - y, (x.shape, y.shape)


def _sub_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    x_shape, y_shape = saved
    return unbroadcast(grad, x_shape), unbroadcast(-grad, y_shape)


def _mul_forward(x: Array, y: Array) -> tuple[Array, Any]:
    _broadcast_shape(x.shape, y.shape)
    return x * y, (x, y)


def _mul_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    x, y = saved
    return unbroadcast(grad * y, x.shape), unbroadcast(grad * x, y.shape)


def _div_forward(x: Array, y: Array) -> tuple[Array, Any]:
    _broadcast_shape(x.shape, y.shape)
    return x / y, (x, y)


def _div_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    x, y = saved
    return unbroadcast(grad / y, x.shape), unbroadcast(-grad * x / (y * y), y.shape)


def _scale_forward(x: Array, *, factor: float) -> tuple[Array, Any]:
    return x * factor, factor


def _scale_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad * saved,)


def _square_forward(x: Array) -> tuple[Array, Any]:
    return x * x, x


def _square_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (2.0 * saved * grad,)


def _sqrt_forward(x: Array) -> tuple[Array, Any]:
    out = np.sqrt(x)
    return out, out


def _sqrt_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad / (2.0 * saved),)


def _relu_forward(x: Array) -> tuple[Array, Any]:
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def _relu_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad * saved,)


# reductions and shape plumbing


def _sum_forward(
    x: Array, *, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> tuple[Array, Any]:
    return np.asarray(x.sum(axis=axis, keepdims=keepdims)), (x.shape, axis, keepdims)


def _sum_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    shape, axis, keepdims = saved
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return (np.broadcast_to(grad, shape).copy(),)


def _reshape_forward(x: Array, *, shape: tuple[int, ...]) -> tuple[Array, Any]:
    try:
        return x.reshape(shape), x.shape
    except ValueError as exc:
        raise ContractViolation(f"cannot reshape {x.shape} to {shape}") from exc


def _reshape_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad.reshape(saved),)


def _take_forward(x: Array, *, index: Any) -> tuple[Array, Any]:
    return np.array(x[index]), (x.shape, index)


def _take_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    shape, index = saved
    out = np.zeros(shape)
    np.add.at(out, index, grad)
    return (out,)


def _matvec_forward(w: Array, x: Array) -> tuple[Array, Any]:
    if w.ndim != 2 or x.shape[-1] != w.shape[1] or x.ndim not in (1, 2):
        raise ContractViolation(f"matvec shapes incompatible: W{w.shape} x{x.shape}")
    return x @ w.T, (w, x)


def _matvec_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    w, x = saved
    grad_w = np.outer(grad, x) if x.ndim == 1 else grad.T @ x
    return grad_w, grad @ w


def _log_softmax_forward(x: Array) -> tuple[Array, Any]:
    out = x - logsumexp(x, axis=-1, keepdims=True)
    return out, out


def _log_softmax_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad - np.exp(saved) * grad.sum(axis=-1, keepdims=True),)


def _pick_forward(x: Array, *, indices: NDArray[np.int64]) -> tuple[Array, Any]:
    if x.ndim != 2 or indices.shape != (x.shape[0],):
        raise ContractViolation(f"pick expects (B, K) and (B,), got {x.shape}, {indices.shape}")
    if np.any(indices < 0) or np.any(indices >= x.shape[1]):
        raise ContractViolation("pick index out of range")
    rows = np.arange(x.shape[0])
    return x[rows, indices], (x.shape, rows, indices)


def _pick_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    shape, rows, indices = saved
    out = np.zeros(shape)
    out[rows, indices] = grad
    return (out,)


# quaternion primitives


def _hamilton_forward(p: Array, q: Array) -> tuple[Array, Any]:
    _require_quaternion("hamilton", p, q)
    _broadcast_shape(p.shape, q.shape)
    return hamilton_product(p, q), (p, q)


def _hamilton_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    p, q = saved
    grad_p = hamilton_product(grad, conjugate(q))
    grad_q = hamilton_product(conjugate(p), grad)
    return unbroadcast(grad_p, p.shape), unbroadcast(grad_q, q.shape)


def _qinverse_forward(q: Array) -> tuple[Array, Any]:
    _require_quaternion("qinverse", q)
    out = inverse(q)
    return out, out


def _qinverse_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    # d(q^-1) = -q^-1 dq q^-1, so the adjoint is -conj(q^-1) g conj(q^-1).
    inv_conj = conjugate(saved)
    return (-hamilton_product(hamilton_product(inv_conj, grad), inv_conj),)


def _magnitude_forward(q: Array) -> tuple[Array, Any]:
    _require_quaternion("magnitude", q)
    norm = np.sqrt(np.einsum("...i,...i->...", q, q))
    return norm, (q, norm)


def _magnitude_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    q, norm = saved
    safe = np.where(norm > 0, norm, 1.0)
    scale = np.where(norm > 0, grad / safe, 0.0)
    return (scale[..., None] * q,)


def _real_part_forward(q: Array) -> tuple[Array, Any]:
    _require_quaternion("real_part", q)
    return q[..., 0].copy(), q.shape


def _real_part_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    out = np.zeros(saved)
    out[..., 0] = grad
    return (out,)


def _embed_pure_forward(v: Array) -> tuple[Array, Any]:
    if v.shape[-1:] != (3,):
        raise ContractViolation(f"embed_pure expects trailing axis of length 3, got {v.shape}")
    out = np.zeros((*v.shape[:-1], 4))
    out[..., 1:] = v
    return out, None


def _embed_pure_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad[..., 1:].copy(),)


def _embed_real_forward(r: Array) -> tuple[Array, Any]:
    out = np.zeros((*r.shape, 4))
    out[..., 0] = r
    return out, None


def _embed_real_backward(grad: Array, saved: Any) -> Sequence[Array | None]:
    return (grad[..., 0].copy(),)


ADD = Primitive("add", _add_forward, _add_backward)
SUB = Primitive("sub", _sub_forward, _sub_backward)
MUL = Primitive("mul", _mul_forward, _mul_backward)
DIV = Primitive("div", _div_forward, _div_backward)
SCALE = Primitive("scale", _scale_forward, _scale_backward)
SQUARE = Primitive("square", _square_forward, _square_backward)
SQRT = Primitive("sqrt", _sqrt_forward, _sqrt_backward)
RELU = Primitive("relu", _relu_forward, _relu_backward)
SUM = Primitive("sum", _sum_forward, _sum_backward)
RESHAPE = Primitive("reshape", _reshape_forward, _reshape_backward)
TAKE = Primitive("take", _take_forward, _take_backward)
MATVEC = Primitive("matvec", _matvec_forward, _matvec_backward)
LOG_SOFTMAX = Primitive("log_softmax", _log_softmax_forward, _log_softmax_backward)
PICK = Primitive("pick", _pick_forward, _pick_backward)
HAMILTON = Primitive("hamilton", _hamilton_forward, _hamilton_backward)
QINVERSE = Primitive("qinverse", _qinverse_forward, _qinverse_backward)
MAGNITUDE = Primitive("magnitude", _magnitude_forward, _magnitude_backward)
REAL_PART = Primitive("real_part", _real_part_forward, _real_part_backward)
EMBED_PURE = Primitive("embed_pure", _embed_pure_forward, _embed_pure_backward)
EMBED_REAL = Primitive("embed_real", _embed_real_forward, _embed_real_backward)
