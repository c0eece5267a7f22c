"""Synthetic gait cohorts built from class-specific closed Fourier curves.

Each class owns a smooth closed 3-D trajectory: a constant offset plus 3 to 6 harmonics per
axis. Cycles are that trajectory sampled at ``T`` points after a small random time shift,
with optional Gaussian noise. Every class shares the canonical frame, so orientation is a
usable cue for a non-invariant model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.data.cycles import CYCLE_LENGTH, GaitDataset, Split

logger = logging.getLogger(__name__)

MIN_HARMONICS = 3
MAX_HARMONICS = 6
MIN_SEPARATION = 1e-3
MAX_SIGNATURE_ATTEMPTS = 100


@dataclass(frozen=True, eq=False)
class ClassSignature:
    """Fourier coefficients of one class curve; ``cosine``/``sine`` are (MAX_HARMONICS, 3)."""

    offset: NDArray[np.float64]
    cosine: NDArray[np.float64]
    sine: NDArray[np.float64]

    def sample(self, length: int = CYCLE_LENGTH, phase: float = 0.0) -> NDArray[np.float64]:
        """Evaluate at ``length`` points; ``phase`` is a fraction of one cycle."""
        t = 2.0 * np.pi * (np.arange(length) / length + phase)
        orders = np.arange(1, self.cosine.shape[0] + 1)
        angles = np.outer(t, orders)
        return self.offset + np.cos(angles) @ self.cosine + np.sin(angles) @ self.sine


def random_signature(rng: np.random.Generator) -> ClassSignature:
    cosine = np.zeros((MAX_HARMONICS, 3))
    sine = np.zeros((MAX_HARMONICS, 3))
    for axis in range(3):
        count = int(rng.integers(MIN_HARMONICS, MAX_HARMONICS + 1))
        decay = 1.0 / np.arange(1, count + 1)
        cosine[:count, axis] = rng.normal(0.0, 1.0, count) * decay
        sine[:count, axis] = rng.normal(0.0, 1.0, count) * decay
    offset = rng.normal(0.0, 0.5, 3)
    return ClassSignature(offset, cosine, sine)


def min_phase_distance(
    first: NDArray[np.float64], second: NDArray[np.float64]
) -> float:
    """Smallest RMS distance between ``first`` and any circular time shift of ``second``."""
    return min(
        float(np.sqrt(np.mean((first - np.roll(second, shift, axis=0)) ** 2)))
        for shift in range(second.shape[0])
    )


def make_signatures(
    num_classes: int, rng: np.random.Generator, length: int = CYCLE_LENGTH
) -> list[ClassSignature]:
    """Draw one signature per class, redrawing any that nearly coincide with an earlier one."""
    signatures: list[ClassSignature] = []
    curves: list[NDArray[np.float64]] = []
    for label in range(num_classes):
        for _attempt in range(MAX_SIGNATURE_ATTEMPTS):
            candidate = random_signature(rng)
            curve = candidate.sample(length)
            if all(min_phase_distance(curve, other) > MIN_SEPARATION for other in curves):
                break
            logger.debug("Redrawing signature for class %d: too close to an earlier class", label)
        else:
            raise ContractViolation(f"could not draw a distinct signature for class {label}")
        signatures.append(candidate)
        curves.append(curve)
    return signatures


def sample_cycles(
    signatures: list[ClassSignature],
    cycles_per_class: int,
    noise_sigma: float,
    rng: np.random.Generator,
    *,
    length: int = CYCLE_LENGTH,
    max_phase_shift: float = 0.05,
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    samples = np.empty((len(signatures) * cycles_per_class, length, 3))
    labels = np.repeat(np.arange(len(signatures)), cycles_per_class)
    row = 0
    for signature in signatures:
        for _ in range(cycles_per_class):
            phase = rng.uniform(-max_phase_shift, max_phase_shift) if max_phase_shift else 0.0
            cycle = signature.sample(length, phase)
            if noise_sigma > 0:
                cycle = cycle + rng.normal(0.0, noise_sigma, cycle.shape)
            samples[row] = cycle
            row += 1
    # Round through float32 so the dataset file stores it exactly.
    return samples.astype(np.float32).astype(np.float64), labels


def generate_synthetic_dataset(
    num_classes: int,
    cycles_per_class: int,
    noise_sigma: float,
    rng: np.random.Generator | int,
    *,
    length: int = CYCLE_LENGTH,
    max_phase_shift: float = 0.05,
    split: Split = "train",
) -> GaitDataset:
    """Generate ``num_classes * cycles_per_class`` cycles, ordered by class.

    Passing an integer seeds a fresh generator and records the seed in the provenance.
    """
    if num_classes < 2:
        raise ContractViolation(f"need at least 2 classes, got {num_classes}")
    if cycles_per_class < 0 or noise_sigma < 0:
        raise ContractViolation("cycles_per_class and noise_sigma must be non-negative")
    seed = rng if isinstance(rng, int) else None
    generator = np.random.default_rng(rng) if isinstance(rng, int) else rng

    signatures = make_signatures(num_classes, generator, length)
    samples, labels = sample_cycles(
        signatures,
        cycles_per_class,
        noise_sigma,
        generator,
        length=length,
        max_phase_shift=max_phase_shift,
    )
    logger.info(
        "Generated %d synthetic cycles (%d classes, noise %.3g)",
        len(labels),
        num_classes,
        noise_sigma,
    )
    return GaitDataset(
        samples,
        labels,
        num_classes,
        split,
        {"seed": seed, "noise_sigma": float(noise_sigma)},
    )
