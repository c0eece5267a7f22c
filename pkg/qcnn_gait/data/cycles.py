"""Gait cycles, datasets and the orientation transforms applied to them."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import ContractViolation, QuaternionDomainError
from qcnn_gait.quaternion.algebra import (
    conjugation_rotate,
    embed_pure,
    magnitude,
    random_unit_quaternion,
    vector_part,
)

logger = logging.getLogger(__name__)

CYCLE_LENGTH = 100
UNIT_TOLERANCE = 1e-9

Split = Literal[
    "train",
    "val",
    "test",
    "test-flipped",
    "train-flipped",
    "val-flipped",
    "all-flipped",
]


def _frozen(array: NDArray[Any]) -> NDArray[Any]:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GaitCycle:
    """One gait cycle: (T, 3) time-major acceleration vectors and a class label."""

    samples: NDArray[np.float64]
    label: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise ContractViolation(f"cycle samples must be (T, 3), got {samples.shape}")
        if not np.isfinite(samples).all():
            raise ContractViolation("cycle samples must be finite")
        if self.label < 0:
            raise ContractViolation(f"labels must be non-negative, got {self.label}")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "label", int(self.label))

    @property
    def length(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class GaitDataset:
    """Immutable collection of equal-length cycles stored as one (N, T, 3) array."""

    samples: NDArray[np.float64]
    labels: NDArray[np.int64]
    num_classes: int
    split: Split = "train"
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if samples.ndim != 3 or samples.shape[2] != 3:
            raise ContractViolation(f"dataset samples must be (N, T, 3), got {samples.shape}")
        if labels.shape != (samples.shape[0],):
            raise ContractViolation(
                f"{samples.shape[0]} cycles but labels have shape {labels.shape}"
            )
        if self.num_classes < 1:
            raise ContractViolation("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ContractViolation(f"every label must lie in [0, {self.num_classes})")
        if not np.isfinite(samples).all():
            raise ContractViolation("dataset samples must be finite")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @classmethod
    def from_cycles(
        cls,
        cycles: Sequence[GaitCycle],
        num_classes: int,
        split: Split = "train",
        *,
        length: int = CYCLE_LENGTH,
    ) -> GaitDataset:
        if any(cycle.length != length for cycle in cycles):
            raise ContractViolation(f"every cycle must have length {length}; resample first")
        samples = (
            np.stack([cycle.samples for cycle in cycles]) if cycles else np.zeros((0, length, 3))
        )
        labels = np.array([cycle.label for cycle in cycles], dtype=np.int64)
        return cls(samples, labels, num_classes, split)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def cycles(self) -> list[GaitCycle]:
        return [
            GaitCycle(samples, int(label))
            for samples, label in zip(self.samples, self.labels, strict=True)
        ]

    def subset(self, indices: ArrayLike, split: Split | None = None) -> GaitDataset:
        indices = np.asarray(indices, dtype=np.int64)
        return GaitDataset(
            self.samples[indices],
            self.labels[indices],
            self.num_classes,
            split or self.split,
            self.provenance,
        )

    def with_samples(self, samples: ArrayLike, split: Split | None = None) -> GaitDataset:
        return GaitDataset(
            samples, self.labels, self.num_classes, split or self.split, self.provenance
        )

    def equals(self, other: GaitDataset) -> bool:
        """Bit-exact comparison of samples, labels, class count and split."""
        return (
            self.num_classes == other.num_classes
            and self.split == other.split
            and self.samples.shape == other.samples.shape
            and np.array_equal(self.labels, other.labels)
            and self.samples.tobytes() == other.samples.tobytes()
        )


def concat_datasets(datasets: Sequence[GaitDataset], split: Split) -> GaitDataset:
    if not datasets:
        raise ContractViolation("nothing to concatenate")
    num_classes = datasets[0].num_classes
    if any(dataset.num_classes != num_classes for dataset in datasets):
        raise ContractViolation("datasets disagree on num_classes")
    return GaitDataset(
        np.concatenate([dataset.samples for dataset in datasets]),
        np.concatenate([dataset.labels for dataset in datasets]),
        num_classes,
        split,
        datasets[0].provenance,
    )


def resample_cycle(raw: ArrayLike, target: int = CYCLE_LENGTH) -> NDArray[np.float64]:
    """Linearly interpolate a (T_raw, 3) cycle to ``target`` evenly spaced samples.

    Sample positions run from 0 to T_raw - 1, so both endpoints are kept exactly.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise ContractViolation(f"raw cycle must be (T_raw, 3), got {raw.shape}")
    length = raw.shape[0]
    if length < 2:
        raise ContractViolation(f"resampling needs at least 2 samples, got {length}")
    if target < 2:
        raise ContractViolation(f"target length must be at least 2, got {target}")
    if length == target:
        return raw.copy()
    source = np.arange(length, dtype=np.float64)
    positions = np.linspace(0.0, length - 1, target)
    return np.stack([np.interp(positions, source, raw[:, axis]) for axis in range(3)], axis=1)


def _check_unit(r: NDArray[np.float64]) -> None:
    norms = magnitude(r)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        raise QuaternionDomainError(
            f"rotation quaternions must be unit within {UNIT_TOLERANCE}; "
            f"got norm {norms.max():.12g}"
        )


def rotate_samples(samples: ArrayLike, r: ArrayLike) -> NDArray[np.float64]:
    """Rotate (..., T, 3) vectors; ``r`` is (4,) or one quaternion per leading index."""
    samples = np.asarray(samples, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_unit(r)
    if r.ndim > 1:
        r = r[..., None, :]
    return vector_part(conjugation_rotate(r, embed_pure(samples)))


def rotate_cycle(cycle: GaitCycle, r: ArrayLike) -> GaitCycle:
    """Apply one rigid rotation to every sample of ``cycle``; the label is unchanged."""
    return GaitCycle(rotate_samples(cycle.samples, r), cycle.label)


def rotate_dataset(
    dataset: GaitDataset, rotations: ArrayLike, split: Split | None = None
) -> GaitDataset:
    """Rotate every cycle by one shared quaternion or by one quaternion per cycle."""
    rotations = np.asarray(rotations, dtype=np.float64)
    if rotations.ndim == 2 and rotations.shape != (len(dataset), 4):
        raise ContractViolation(
            f"expected ({len(dataset)}, 4) rotations, got {rotations.shape}"
        )
    if len(dataset) == 0:
        return dataset.with_samples(dataset.samples, split)
    return dataset.with_samples(rotate_samples(dataset.samples, rotations), split)


def randomly_rotate_dataset(
    dataset: GaitDataset, rng: np.random.Generator, split: Split | None = None
) -> GaitDataset:
    """One uniformly random rotation per cycle."""
    rotations = random_unit_quaternion(rng, size=len(dataset))
    return rotate_dataset(dataset, rotations, split)


def split_train_val(
    dataset: GaitDataset, val_fraction: float, rng: np.random.Generator
) -> tuple[GaitDataset, GaitDataset]:
    """Shuffle deterministically from ``rng`` and hold out ``val_fraction`` for validation."""
    if not 0.0 < val_fraction < 1.0:
        raise ContractViolation(f"val_fraction must lie in (0, 1), got {val_fraction}")
    order = rng.permutation(len(dataset))
    n_val = int(round(len(dataset) * val_fraction))
    if len(dataset) >= 2:
        n_val = min(max(n_val, 1), len(dataset) - 1)
    return dataset.subset(order[n_val:], "train"), dataset.subset(order[:n_val], "val")


def stratified_holdout(
    dataset: GaitDataset, per_class: int, rng: np.random.Generator, split: Split = "test"
) -> tuple[GaitDataset, GaitDataset]:
    """Hold out ``per_class`` random cycles of every class; returns (rest, held_out)."""
    held: list[NDArray[np.int64]] = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        if len(members) <= per_class:
            raise ContractViolation(
                f"class {label} has {len(members)} cycles; cannot hold out {per_class}"
            )
        held.append(rng.choice(members, size=per_class, replace=False))
    held_idx = np.sort(np.concatenate(held)) if held else np.zeros(0, dtype=np.int64)
    rest_idx = np.setdiff1d(np.arange(len(dataset)), held_idx)
    return dataset.subset(rest_idx), dataset.subset(held_idx, split)
