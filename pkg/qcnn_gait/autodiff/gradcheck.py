"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff.tape import Tape, Variable

ScalarFn = Callable[[Variable], Variable]


def _evaluate(f: ScalarFn, point: NDArray[np.float64]) -> float:
    tape = Tape()
    out = f(tape.variable(point, requires_grad=False))
    if out.value.size != 1:
        raise ContractViolation(f"gradient_check needs a scalar function, got shape {out.shape}")
    return float(out.value.reshape(()))


def analytic_gradient(f: ScalarFn, point: ArrayLike) -> NDArray[np.float64]:
    tape = Tape()
    x = tape.variable(point)
    return tape.backward(f(x))[x].copy()


def numerical_gradient(f: ScalarFn, point: ArrayLike, h: float = 1e-6) -> NDArray[np.float64]:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every coordinate."""
    x = np.array(point, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + h
        f_plus = _evaluate(f, x)
        flat_x[i] = original - h
        f_minus = _evaluate(f, x)
        flat_x[i] = original
        flat_grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: ArrayLike, numeric: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return np.abs(a - n) / denom


def gradient_check(f: ScalarFn, point: ArrayLike, h: float = 1e-6) -> float:
    """Maximum relative error between the tape gradient and central differences."""
    if h <= 0:
        raise ContractViolation("finite-difference step h must be positive")
    analytic = analytic_gradient(f, point)
    numeric = numerical_gradient(f, point, h)
    errors = relative_error(analytic, numeric)
    return float(errors.max()) if errors.size else 0.0
