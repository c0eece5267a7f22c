"""Binary QGC1 dataset files and their JSON sidecar manifests.

Layout (little-endian)::

    b"QGC1" | u32 version | u32 num_classes | u32 num_cycles | u32 T
    num_cycles x ( u32 label | T x 3 float32, time-major x, y, z )
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import Field, ValidationError

from qcnn_gait._base import StrictBaseModel
from qcnn_gait._exceptions import DatasetFormatError
from qcnn_gait.data.cycles import GaitDataset, Split

logger = logging.getLogger(__name__)

MAGIC = b"QGC1"
VERSION = 1
HEADER = struct.Struct("<4sIIII")


class DatasetManifest(StrictBaseModel):
    """Sidecar metadata written next to every dataset file."""

    format: Literal["QGC1"] = "QGC1"
    version: int = VERSION
    num_classes: int = Field(ge=1)
    num_cycles: int = Field(ge=0)
    length: int = Field(ge=1)
    split: Split = "train"
    seed: int | None = None
    noise_sigma: float | None = None


def _record_dtype(length: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("samples", "<f4", (length, 3))])


def manifest_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def save_dataset(dataset: GaitDataset, path: Path, *, write_manifest: bool = True) -> Path:
    """Write ``dataset`` to ``path``; values are stored as float32."""
    path = Path(path)
    stored = dataset.samples.astype("<f4")
    if not np.array_equal(stored.astype(np.float64), dataset.samples):
        logger.warning("Dataset values are not float32-exact; saving %s rounds them", path)

    records = np.zeros(len(dataset), dtype=_record_dtype(dataset.length))
    records["label"] = dataset.labels
    records["samples"] = stored

    path.parent.mkdir(parents=True, exist_ok=True)
    header = HEADER.pack(MAGIC, VERSION, dataset.num_classes, len(dataset), dataset.length)
    path.write_bytes(header + records.tobytes())

    if write_manifest:
        manifest = DatasetManifest(
            num_classes=dataset.num_classes,
            num_cycles=len(dataset),
            length=dataset.length,
            split=dataset.split,
            seed=dataset.provenance.get("seed"),
            noise_sigma=dataset.provenance.get("noise_sigma"),
        )
        manifest_path(path).write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info("Wrote %d cycles to %s", len(dataset), path)
    return path


def parse_dataset(data: bytes, split: Split = "train") -> GaitDataset:
    """Decode QGC1 bytes; errors name the byte offset where parsing failed."""
    if len(data) < HEADER.size:
        raise DatasetFormatError(
            f"truncated header: need {HEADER.size} bytes, file has {len(data)}", offset=len(data)
        )
    magic, version, num_classes, num_cycles, length = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", offset=4)
    if num_classes == 0:
        raise DatasetFormatError("num_classes must be positive", offset=8)
    if length == 0:
        raise DatasetFormatError("cycle length T must be positive", offset=16)

    dtype = _record_dtype(length)
    body = len(data) - HEADER.size
    complete = body // dtype.itemsize
    if complete < num_cycles:
        raise DatasetFormatError(
            f"truncated file: header declares {num_cycles} cycles, found {complete} complete",
            offset=HEADER.size + complete * dtype.itemsize,
        )
    expected_end = HEADER.size + num_cycles * dtype.itemsize
    if len(data) > expected_end:
        raise DatasetFormatError(
            f"{len(data) - expected_end} unexpected trailing bytes", offset=expected_end
        )

    records = np.frombuffer(data, dtype=dtype, count=num_cycles, offset=HEADER.size)
    labels = records["label"].astype(np.int64)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        index = int(bad[0])
        raise DatasetFormatError(
            f"cycle {index} has label {labels[index]} >= num_classes {num_classes}",
            offset=HEADER.size + index * dtype.itemsize,
        )
    samples = records["samples"].astype(np.float64)
    finite = np.isfinite(samples).all(axis=(1, 2))
    if not finite.all():
        index = int(np.flatnonzero(~finite)[0])
        raise DatasetFormatError(
            f"cycle {index} contains non-finite samples",
            offset=HEADER.size + index * dtype.itemsize + 4,
        )
    if num_cycles == 0:
        samples = np.zeros((0, length, 3))
    return GaitDataset(samples, labels, num_classes, split)


def _read_manifest(sidecar: Path) -> DatasetManifest:
    try:
        return DatasetManifest.model_validate_json(sidecar.read_text())
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
            for error in exc.errors()
        )
        raise DatasetFormatError(f"invalid manifest {sidecar.name}: {problems}", offset=0) from exc


# header field -> byte offset, for manifest cross-checks
_HEADER_FIELDS = {"num_classes": 8, "num_cycles": 12, "length": 16}


def _check_manifest_matches(
    manifest: DatasetManifest, dataset: GaitDataset, sidecar: Path
) -> None:
    header = {
        "num_classes": dataset.num_classes,
        "num_cycles": len(dataset),
        "length": dataset.length,
    }
    for field, offset in _HEADER_FIELDS.items():
        declared = getattr(manifest, field)
        if declared != header[field]:
            raise DatasetFormatError(
                f"manifest {sidecar.name} declares {field}={declared}, header has {header[field]}",
                offset=offset,
            )


def load_dataset(path: Path) -> GaitDataset:
    """Read a QGC1 file, taking split and provenance from the sidecar manifest if present."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"Dataset file not found: {path}") from None

    sidecar = manifest_path(path)
    split: Split = "train"
    provenance: dict[str, object] = {}
    manifest = _read_manifest(sidecar) if sidecar.exists() else None
    if manifest is not None:
        split = manifest.split
        provenance = {"seed": manifest.seed, "noise_sigma": manifest.noise_sigma}

    dataset = parse_dataset(data, split)
    if manifest is not None:
        _check_manifest_matches(manifest, dataset, sidecar)
    logger.debug("Loaded %d cycles from %s", len(dataset), path)
    if provenance:
        return GaitDataset(
            dataset.samples, dataset.labels, dataset.num_classes, dataset.split, provenance
        )
    return dataset
