"""Quaternion batch norm: divide each channel by a running RMS estimate.

No shift is applied, since a translation of quaternion values would break rotation
equivariance. The running estimate is layer state and is not differentiated through.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff import ops
from qcnn_gait.autodiff.tape import Variable

logger = logging.getLogger(__name__)

BatchNormMode = Literal["train", "eval"]


@dataclass
class QBatchNormState:
    """Running per-channel RMS ``mu`` (starts at 1) and momentum ``epsilon``."""

    mu: NDArray[np.float64]
    epsilon: float = 0.1
    mode: BatchNormMode = "train"
    skipped_updates: int = field(default=0)

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if not 0.0 < self.epsilon <= 1.0:
            raise ContractViolation(f"batch norm momentum must lie in (0, 1], got {self.epsilon}")
        if np.any(self.mu <= 0):
            raise ContractViolation("batch norm running RMS must be positive")

    @classmethod
    def fresh(cls, channels: int, epsilon: float = 0.1) -> QBatchNormState:
        return cls(mu=np.ones(channels), epsilon=epsilon)


def channel_rms(batch: NDArray[np.float64]) -> NDArray[np.float64]:
    """RMS quaternion magnitude per channel of a (m, C, n, 4) batch."""
    if batch.ndim != 4 or batch.shape[-1] != 4:
        raise ContractViolation(f"batch must be (m, C, n, 4), got {batch.shape}")
    m, _, n, _ = batch.shape
    if m * n == 0:
        raise ContractViolation("batch norm needs at least one sample per channel")
    return np.sqrt(np.einsum("mcnk,mcnk->c", batch, batch) / (m * n))


def update_running_rms(state: QBatchNormState, batch: NDArray[np.float64]) -> None:
    """``mu <- (1 - eps) mu + eps * rms`` for every channel with non-zero RMS."""
    rms = channel_rms(batch)
    if rms.shape != state.mu.shape:
        raise ContractViolation(f"batch has {rms.shape[0]} channels, state has {state.mu.shape[0]}")
    live = rms > 0
    if not live.all():
        state.skipped_updates += int((~live).sum())
        logger.debug("Skipping batch norm update for all-zero channels %s", np.flatnonzero(~live))
    state.mu = np.where(live, (1.0 - state.epsilon) * state.mu + state.epsilon * rms, state.mu)


def qbatchnorm(x: Variable, state: QBatchNormState) -> Variable:
    """Record a batch-norm pass; in train mode ``mu`` is updated before normalising."""
    if state.mode == "train":
        update_running_rms(state, x.value)
    elif x.shape[1] != state.mu.shape[0]:
        raise ContractViolation(f"batch has {x.shape[1]} channels, state has {state.mu.shape[0]}")
    return ops.mul(x, (1.0 / state.mu)[None, :, None, None])


def qbatchnorm_forward(
    batch: NDArray[np.float64], state: QBatchNormState
) -> NDArray[np.float64]:
    """Array-level batch norm on (m, C, n, 4) inputs; mutates ``state`` in train mode."""
    batch = np.asarray(batch, dtype=np.float64)
    if state.mode == "train":
        update_running_rms(state, batch)
    elif batch.shape[1] != state.mu.shape[0]:
        raise ContractViolation(
            f"batch has {batch.shape[1]} channels, state has {state.mu.shape[0]}"
        )
    return batch * (1.0 / state.mu)[None, :, None, None]
