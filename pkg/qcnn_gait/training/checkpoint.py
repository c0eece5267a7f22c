"""Checkpoint files: a JSON header followed by a float64 parameter blob.

Layout::

    b"QCKP" | u32 header length (LE) | header JSON (UTF-8) | blob

The blob holds the flat parameter vector followed by every batch-norm running RMS vector,
as little-endian float64. The header records the blob offset, length and CRC32.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from qcnn_gait._base import StrictBaseModel
from qcnn_gait._exceptions import CheckpointError, ContractViolation
from qcnn_gait.layers.network import Model, ModelSpec, build_network

logger = logging.getLogger(__name__)

MAGIC = b"QCKP"
VERSION = 1
PREFIX = struct.Struct("<4sI")


class CheckpointHeader(StrictBaseModel):
    format: Literal["QCKP"] = "QCKP"
    version: int = VERSION
    model: ModelSpec
    parameter_count: int
    batchnorm_channels: list[int]
    blob_offset: int
    blob_length: int
    crc32: int
    metadata: dict[str, Any]


@dataclass(frozen=True, eq=False)
class Checkpoint:
    spec: ModelSpec
    parameters: NDArray[np.float64]
    batchnorm_mu: list[NDArray[np.float64]]
    metadata: dict[str, Any] = field(default_factory=dict)


def checkpoint_from_model(model: Model, metadata: dict[str, Any] | None = None) -> Checkpoint:
    return Checkpoint(
        model.spec,
        model.get_flat_parameters(),
        model.get_batchnorm_mu(),
        dict(metadata or {}),
    )


def restore_model(checkpoint: Checkpoint) -> Model:
    """Build the model described by ``checkpoint`` and load its parameters and state."""
    model = build_network(checkpoint.spec, np.random.default_rng(0))
    try:
        model.set_flat_parameters(checkpoint.parameters)
        model.set_batchnorm_mu(checkpoint.batchnorm_mu)
    except ContractViolation as exc:
        raise CheckpointError(f"checkpoint does not match its model spec: {exc}") from exc
    return model


def _blob(checkpoint: Checkpoint) -> bytes:
    arrays = [checkpoint.parameters, *checkpoint.batchnorm_mu]
    return np.concatenate([np.ravel(a) for a in arrays]).astype("<f8").tobytes()


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    blob = _blob(checkpoint)
    header = CheckpointHeader(
        model=checkpoint.spec,
        parameter_count=int(checkpoint.parameters.size),
        batchnorm_channels=[int(mu.size) for mu in checkpoint.batchnorm_mu],
        blob_offset=0,
        blob_length=len(blob),
        crc32=zlib.crc32(blob),
        metadata=checkpoint.metadata,
    )
    # The offset is written inside the header, so settle it by iteration.
    while True:
        encoded = header.model_dump_json().encode("utf-8")
        offset = PREFIX.size + len(encoded)
        if offset == header.blob_offset:
            break
        header = header.model_copy(update={"blob_offset": offset})
    return PREFIX.pack(MAGIC, len(encoded)) + encoded + blob


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < PREFIX.size:
        raise CheckpointError("truncated checkpoint prefix")
    magic, header_length = PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    header_end = PREFIX.size + header_length
    if len(data) < header_end:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = CheckpointHeader.model_validate_json(data[PREFIX.size : header_end])
    except ValidationError as exc:
        raise CheckpointError(f"invalid checkpoint header: {exc}") from exc
    if header.version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.version}")

    blob = data[header.blob_offset : header.blob_offset + header.blob_length]
    if header.blob_offset != header_end or len(blob) != header.blob_length:
        raise CheckpointError("checkpoint blob is truncated or misplaced")
    if zlib.crc32(blob) != header.crc32:
        raise CheckpointError("checkpoint blob failed its CRC32 check")
    expected = 8 * (header.parameter_count + sum(header.batchnorm_channels))
    if header.blob_length != expected:
        raise CheckpointError(f"blob holds {header.blob_length} bytes, expected {expected}")

    values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    parameters = values[: header.parameter_count].copy()
    mus: list[NDArray[np.float64]] = []
    offset = header.parameter_count
    for channels in header.batchnorm_channels:
        mus.append(values[offset : offset + channels].copy())
        offset += channels
    return Checkpoint(header.model, parameters, mus, header.metadata)


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.info("Saved checkpoint (%d parameters) to %s", checkpoint.parameters.size, path)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"Checkpoint file not found: {path}") from None
    return decode_checkpoint(data)
