"""Adam over a flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from qcnn_gait._exceptions import ContractViolation


@dataclass
class Adam:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: NDArray[np.float64] | None = field(default=None, repr=False)
    v: NDArray[np.float64] | None = field(default=None, repr=False)
    t: int = 0

    def step(
        self, params: NDArray[np.float64], grads: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """Return updated parameters; moment estimates are kept on the optimizer."""
        if params.shape != grads.shape:
            raise ContractViolation(f"gradient shape {grads.shape} != parameters {params.shape}")
        if self.m is None or self.v is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (grads * grads)
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def clip_by_global_norm(
    grads: NDArray[np.float64], max_norm: float | None
) -> tuple[NDArray[np.float64], float, bool]:
    """Rescale ``grads`` to at most ``max_norm``; returns (grads, original norm, clipped)."""
    norm = float(np.linalg.norm(grads))
    if max_norm is None or norm <= max_norm:
        return grads, norm, False
    return grads * (max_norm / norm), norm, True
