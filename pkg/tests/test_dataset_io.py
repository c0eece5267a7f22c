from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest

from qcnn_gait._exceptions import DatasetFormatError
from qcnn_gait.data.cycles import GaitDataset
from qcnn_gait.data.io import (
    HEADER,
    DatasetManifest,
    load_dataset,
    manifest_path,
    parse_dataset,
    save_dataset,
)
from qcnn_gait.data.synthetic import generate_synthetic_dataset

RECORD_SIZE = 4 + 100 * 3 * 4


@pytest.fixture
def dataset_file(tmp_path: Path) -> Path:
    dataset = generate_synthetic_dataset(3, 4, 0.05, 7, split="val")
    return save_dataset(dataset, tmp_path / "cohort.qgc1")


def test_round_trip_is_bit_exact(dataset_file: Path) -> None:
    original = generate_synthetic_dataset(3, 4, 0.05, 7, split="val")

    loaded = load_dataset(dataset_file)

    assert loaded.equals(original)
    assert loaded.provenance == {"seed": 7, "noise_sigma": 0.05}
    assert dataset_file.stat().st_size == HEADER.size + 12 * RECORD_SIZE


def test_manifest_sidecar(dataset_file: Path) -> None:
    manifest = DatasetManifest.model_validate_json(manifest_path(dataset_file).read_text())

    assert manifest_path(dataset_file).name == "cohort.json"
    assert (manifest.num_classes, manifest.num_cycles, manifest.length) == (3, 12, 100)
    assert (manifest.split, manifest.seed, manifest.noise_sigma) == ("val", 7, 0.05)


def test_header_layout(dataset_file: Path) -> None:
    magic, version, num_classes, num_cycles, length = HEADER.unpack_from(
        dataset_file.read_bytes(), 0
    )

    assert (magic, version, num_classes, num_cycles, length) == (b"QGC1", 1, 3, 12, 100)


def test_bad_magic_is_reported_at_offset_zero(dataset_file: Path) -> None:
    data = bytearray(dataset_file.read_bytes())
    data[:4] = b"QGC2"

    with pytest.raises(DatasetFormatError, match="magic") as excinfo:
        parse_dataset(bytes(data))
    assert excinfo.value.offset == 0


def test_truncated_file_names_the_incomplete_record(dataset_file: Path) -> None:
    data = dataset_file.read_bytes()[:-10]

    with pytest.raises(DatasetFormatError, match="truncated") as excinfo:
        parse_dataset(data)
    assert excinfo.value.offset == HEADER.size + 11 * RECORD_SIZE


def test_truncated_header(dataset_file: Path) -> None:
    with pytest.raises(DatasetFormatError, match="truncated header"):
        parse_dataset(dataset_file.read_bytes()[:7])


def test_out_of_range_label_names_its_record(dataset_file: Path) -> None:
    data = bytearray(dataset_file.read_bytes())
    struct.pack_into("<I", data, HEADER.size + 5 * RECORD_SIZE, 3)

    with pytest.raises(DatasetFormatError, match="cycle 5 has label 3") as excinfo:
        parse_dataset(bytes(data))
    assert excinfo.value.offset == HEADER.size + 5 * RECORD_SIZE


def test_trailing_bytes_are_rejected(dataset_file: Path) -> None:
    data = dataset_file.read_bytes() + b"\x00\x00"

    with pytest.raises(DatasetFormatError, match="trailing") as excinfo:
        parse_dataset(data)
    assert excinfo.value.offset == HEADER.size + 12 * RECORD_SIZE


def test_unsupported_version(dataset_file: Path) -> None:
    data = bytearray(dataset_file.read_bytes())
    struct.pack_into("<I", data, 4, 2)

    with pytest.raises(DatasetFormatError, match="version") as excinfo:
        parse_dataset(bytes(data))
    assert excinfo.value.offset == 4


def test_empty_dataset_is_a_valid_file(tmp_path: Path) -> None:
    empty = GaitDataset(np.zeros((0, 100, 3)), np.zeros(0, dtype=np.int64), 4, "test")

    path = save_dataset(empty, tmp_path / "empty.qgc1")
    loaded = load_dataset(path)

    assert path.stat().st_size == HEADER.size
    assert len(loaded) == 0 and loaded.num_classes == 4 and loaded.split == "test"


def test_file_without_manifest_loads_as_train(tmp_path: Path) -> None:
    dataset = generate_synthetic_dataset(2, 2, 0.0, 1, split="test")
    path = save_dataset(dataset, tmp_path / "bare.qgc1", write_manifest=False)

    loaded = load_dataset(path)

    assert loaded.split == "train"
    assert not manifest_path(path).exists()


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError, match="Dataset file not found"):
        load_dataset(tmp_path / "absent.qgc1")


def test_malformed_manifest_is_a_format_error(dataset_file: Path) -> None:
    manifest_path(dataset_file).write_text('{"num_classes": "three", "num_cycles": 12')

    with pytest.raises(DatasetFormatError, match="invalid manifest cohort.json"):
        load_dataset(dataset_file)


def test_manifest_with_unknown_split_is_a_format_error(dataset_file: Path) -> None:
    sidecar = manifest_path(dataset_file)
    sidecar.write_text(sidecar.read_text().replace('"val"', '"holdout"'))

    with pytest.raises(DatasetFormatError, match="split") as excinfo:
        load_dataset(dataset_file)

    assert excinfo.value.offset == 0


@pytest.mark.parametrize(
    "field, value, offset", [("num_classes", 5, 8), ("num_cycles", 11, 12), ("length", 50, 16)]
)
def test_manifest_disagreeing_with_header_names_the_field(
    dataset_file: Path, field: str, value: int, offset: int
) -> None:
    sidecar = manifest_path(dataset_file)
    manifest = DatasetManifest.model_validate_json(sidecar.read_text())
    sidecar.write_text(manifest.model_copy(update={field: value}).model_dump_json())

    with pytest.raises(DatasetFormatError, match=f"declares {field}={value}") as excinfo:
        load_dataset(dataset_file)

    assert excinfo.value.offset == offset
