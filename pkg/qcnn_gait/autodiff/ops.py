"""Functional wrappers that record primitives on the tape of their first variable argument."""

from __future__ import annotations

from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff import primitives as P
from qcnn_gait.autodiff.primitives import Primitive
from qcnn_gait.autodiff.tape import Variable


def apply(op: Primitive, *inputs: Variable | ArrayLike, **attrs: Any) -> Variable:
    for value in inputs:
        if isinstance(value, Variable):
            return value.tape.record(op, *inputs, **attrs)
    raise ContractViolation(f"{op.name} needs at least one Variable input")


def add(x: Variable | ArrayLike, y: Variable | ArrayLike) -> Variable:
    return apply(P.ADD, x, y)


def sub(x: Variable | ArrayLike, y: Variable | ArrayLike) -> Variable:
    return apply(P.SUB, x, y)


def mul(x: Variable | ArrayLike, y: Variable | ArrayLike) -> Variable:
    return apply(P.MUL, x, y)


def div(x: Variable | ArrayLike, y: Variable | ArrayLike) -> Variable:
    return apply(P.DIV, x, y)


def scale(x: Variable, factor: float) -> Variable:
    return apply(P.SCALE, x, factor=float(factor))


def square(x: Variable) -> Variable:
    return apply(P.SQUARE, x)


def sqrt(x: Variable) -> Variable:
    return apply(P.SQRT, x)


def relu(x: Variable) -> Variable:
    return apply(P.RELU, x)


def sum(x: Variable, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Variable:
    return apply(P.SUM, x, axis=axis, keepdims=keepdims)


def mean(x: Variable) -> Variable:
    return scale(sum(x), 1.0 / x.value.size)


def reshape(x: Variable, shape: tuple[int, ...]) -> Variable:
    return apply(P.RESHAPE, x, shape=tuple(shape))


def take(x: Variable, index: Any) -> Variable:
    return apply(P.TAKE, x, index=index)


def matvec(w: Variable | ArrayLike, x: Variable | ArrayLike) -> Variable:
    """``x @ w.T`` for a matrix ``w`` of shape (out, in) and ``x`` of shape (in,) or (B, in)."""
    return apply(P.MATVEC, w, x)


def log_softmax(x: Variable) -> Variable:
    return apply(P.LOG_SOFTMAX, x)


def pick(x: Variable, indices: ArrayLike) -> Variable:
    return apply(P.PICK, x, indices=np.asarray(indices, dtype=np.int64))


def cross_entropy(logits: Variable, labels: ArrayLike) -> Variable:
    """Mean softmax cross-entropy of ``logits`` (B, K) against integer ``labels``."""
    return scale(mean(pick(log_softmax(logits), labels)), -1.0)


def hamilton(p: Variable | ArrayLike, q: Variable | ArrayLike) -> Variable:
    return apply(P.HAMILTON, p, q)


def qinverse(q: Variable) -> Variable:
    return apply(P.QINVERSE, q)


def magnitude(q: Variable) -> Variable:
    return apply(P.MAGNITUDE, q)


def real_part(q: Variable) -> Variable:
    return apply(P.REAL_PART, q)


def embed_pure(v: Variable) -> Variable:
    return apply(P.EMBED_PURE, v)


def embed_real(r: Variable | ArrayLike) -> Variable:
    return apply(P.EMBED_REAL, r)


def add_real(q: Variable | ArrayLike, r: Variable | ArrayLike) -> Variable:
    """Add real scalars ``r`` to the scalar part of quaternions ``q``."""
    if isinstance(r, Variable):
        return add(q, embed_real(r))
    real = np.zeros((*np.shape(r), 4))
    real[..., 0] = r
    return add(q, real)
