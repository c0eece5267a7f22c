"""Define-by-run reverse-mode tape.

A tape is rebuilt on every forward pass. Nodes are appended in evaluation order, so a
node's inputs always precede it and reverse index order is a valid reverse-topological
order. ``backward`` walks that order once and accumulates gradients in a fixed sequence,
which makes gradients bit-reproducible for identical tapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff import primitives as P
from qcnn_gait.autodiff.primitives import Primitive


@dataclass
class _Node:
    op: Primitive | None
    inputs: tuple[int, ...]
    saved: Any
    value: NDArray[np.float64]
    requires_grad: bool


class Variable:
    """Array value recorded on a tape."""

    __slots__ = ("value", "tape", "index", "requires_grad")

    def __init__(
        self, value: NDArray[np.float64], tape: Tape, index: int, requires_grad: bool
    ) -> None:
        self.value = value
        self.tape = tape
        self.index = index
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return (
            f"Variable(shape={self.shape}, index={self.index}, "
            f"requires_grad={self.requires_grad})"
        )

    def __add__(self, other: Variable | ArrayLike) -> Variable:
        return self.tape.record(P.ADD, self, other)

    def __radd__(self, other: ArrayLike) -> Variable:
        return self.tape.record(P.ADD, other, self)

    def __sub__(self, other: Variable | ArrayLike) -> Variable:
        return self.tape.record(P.SUB, self, other)

    def __rsub__(self, other: ArrayLike) -> Variable:
        return self.tape.record(P.SUB, other, self)

    def __mul__(self, other: Variable | ArrayLike) -> Variable:
        return self.tape.record(P.MUL, self, other)

    def __rmul__(self, other: ArrayLike) -> Variable:
        return self.tape.record(P.MUL, other, self)

    def __truediv__(self, other: Variable | ArrayLike) -> Variable:
        return self.tape.record(P.DIV, self, other)

    def __neg__(self) -> Variable:
        return self.tape.record(P.SCALE, self, factor=-1.0)


class Gradients:
    """Gradient map returned by :meth:`Tape.backward`."""

    def __init__(self, tape: Tape, grads: dict[int, NDArray[np.float64]]) -> None:
        self._tape = tape
        self._grads = grads

    def __getitem__(self, var: Variable) -> NDArray[np.float64]:
        if var.tape is not self._tape:
            raise ContractViolation("variable belongs to a different tape")
        grad = self._grads.get(var.index)
        if grad is None:
            return np.zeros_like(var.value)
        return grad

    def __contains__(self, var: Variable) -> bool:
        return var.tape is self._tape and var.index in self._grads

    def __len__(self) -> int:
        return len(self._grads)


class Tape:
    """Append-only list of recorded operations. Single-writer."""

    def __init__(self) -> None:
        self._nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def variable(self, value: ArrayLike, *, requires_grad: bool = True) -> Variable:
        """Record a leaf holding a private read-only copy of ``value``."""
        arr = np.array(value, dtype=np.float64)
        arr.flags.writeable = False
        return self._append(_Node(None, (), None, arr, requires_grad))

    def constant(self, value: ArrayLike) -> Variable:
        return self.variable(value, requires_grad=False)

    def lift(self, value: Variable | ArrayLike) -> Variable:
        if isinstance(value, Variable):
            if value.tape is not self:
                raise ContractViolation("cannot mix variables from different tapes")
            return value
        return self.constant(value)

    def record(self, op: Primitive, *inputs: Variable | ArrayLike, **attrs: Any) -> Variable:
        """Evaluate ``op`` on ``inputs`` and append the resulting node."""
        lifted = [self.lift(value) for value in inputs]
        value, saved = op.forward(*(var.value for var in lifted), **attrs)
        out = np.asarray(value, dtype=np.float64)
        out.flags.writeable = False
        requires_grad = any(var.requires_grad for var in lifted)
        node = _Node(op, tuple(var.index for var in lifted), saved, out, requires_grad)
        return self._append(node)

    def backward(self, loss: Variable) -> Gradients:
        """Accumulate d(loss)/d(node) for every node reachable from ``loss``."""
        if loss.tape is not self:
            raise ContractViolation("loss belongs to a different tape")
        if loss.value.size != 1:
            raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")

        grads: dict[int, NDArray[np.float64]] = {loss.index: np.ones_like(loss.value)}
        for index in range(loss.index, -1, -1):
            grad = grads.get(index)
            node = self._nodes[index]
            if grad is None or node.op is None or not node.requires_grad:
                continue
            input_grads = node.op.backward(grad, node.saved)
            for input_index, input_grad in zip(node.inputs, input_grads, strict=True):
                if input_grad is None or not self._nodes[input_index].requires_grad:
                    continue
                if input_index in grads:
                    grads[input_index] = grads[input_index] + input_grad
                else:
                    grads[input_index] = np.array(input_grad, dtype=np.float64)
        return Gradients(self, grads)

    def _append(self, node: _Node) -> Variable:
        self._nodes.append(node)
        return Variable(node.value, self, len(self._nodes) - 1, node.requires_grad)
