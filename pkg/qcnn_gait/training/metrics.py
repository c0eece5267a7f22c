"""Classification metrics and the per-epoch history file."""

from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import ContractViolation

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ("epoch", "train_loss", "val_top1", "val_top5", "clip_events")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_top1: float
    val_top5: float
    clip_events: int
    degenerate_rotations: int = 0


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Top-k accuracy plus per-class accuracy and confusion counts (rows = true label)."""

    top1: float
    top5: float
    per_class_accuracy: NDArray[np.float64]
    confusion: NDArray[np.int64]
    num_samples: int

    def to_dict(self) -> dict[str, object]:
        return {
            "top1": self.top1,
            "top5": self.top5,
            "num_samples": self.num_samples,
            "per_class_accuracy": [float(v) for v in self.per_class_accuracy],
            "confusion": self.confusion.tolist(),
        }


def rank_classes(logits: ArrayLike) -> NDArray[np.int64]:
    """Class indices sorted by descending logit; ties go to the lower index."""
    logits = np.asarray(logits, dtype=np.float64)
    return np.argsort(-logits, axis=1, kind="stable")


def report_from_logits(logits: ArrayLike, labels: ArrayLike, num_classes: int) -> EvalReport:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or logits.shape != (labels.shape[0], num_classes):
        raise ContractViolation(
            f"expected logits of shape ({labels.shape[0]}, {num_classes}), got {logits.shape}"
        )
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    if labels.size == 0:
        return EvalReport(0.0, 0.0, np.zeros(num_classes), confusion, 0)

    ranked = rank_classes(logits)
    hits = ranked == labels[:, None]
    k = min(5, num_classes)
    top1 = float(hits[:, 0].mean())
    top5 = float(hits[:, :k].any(axis=1).mean())

    np.add.at(confusion, (labels, ranked[:, 0]), 1)
    totals = confusion.sum(axis=1)
    per_class = np.divide(
        np.diag(confusion).astype(np.float64),
        totals,
        out=np.zeros(num_classes),
        where=totals > 0,
    )
    return EvalReport(top1, top5, per_class, confusion, int(labels.size))


def write_metrics_csv(history: Sequence[EpochMetrics], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in history:
            values = asdict(row)
            values["train_loss"] = repr(row.train_loss)
            values["val_top1"] = repr(row.val_top1)
            values["val_top5"] = repr(row.val_top5)
            writer.writerow(values)
    logger.debug("Wrote %d epochs of metrics to %s", len(history), path)
    return path
