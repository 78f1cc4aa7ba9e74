"""
Checkpoint container.

    WFCKPT <manifest_bytes>\\n
    <manifest: UTF-8 JSON>
    <payload: little-endian float64 tensors in manifest order>

The manifest records the format version, model kind, config, seed, feature
columns, positive cause codes, standardizer, training-log digest, every
tensor's name/shape/offset/count and the payload's sha256. Loading never
migrates other versions.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from app.config import NATURAL_CAUSE_CODES, get_settings
from app.exceptions import (
    ChecksumError,
    CheckpointVersionError,
    DimensionError,
    IntegrityError,
    ManifestError,
)
from app.models.checkpoint import CheckpointManifest, ModelCheckpoint, StandardizerState, TensorEntry
from app.utils.logging_config import get_logger
from app.utils.type_conversion import to_python_type

logger = get_logger("checkpoint")

MAGIC = b"WFCKPT"
PAYLOAD_DTYPE = np.dtype("<f8")


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def checkpoint_from_model(
    model,
    feature_columns: Optional[List[str]] = None,
    standardizer: Optional[StandardizerState] = None,
    log_digest: Optional[str] = None,
    positive_causes: Optional[List[int]] = None,
) -> ModelCheckpoint:
    """Snapshot a CauseModel's parameters and buffers."""
    return ModelCheckpoint(
        format_version=get_settings().checkpoint_format_version,
        kind=model.kind.value,
        config=model.config.model_dump(mode="json"),
        seed=model.seed,
        feature_columns=list(feature_columns or []),
        positive_causes=sorted(positive_causes or NATURAL_CAUSE_CODES),
        standardizer=standardizer,
        log_digest=log_digest,
        params={name: p.data.copy() for name, p in model.named_parameters()},
        buffers={name: b.copy() for name, b in model.named_buffers()},
    )


def checkpoint_save(checkpoint: ModelCheckpoint, path: Union[str, Path]) -> Path:
    """Write the container atomically (temp file + rename)."""
    path = Path(path)
    entries: List[TensorEntry] = []
    blocks: List[np.ndarray] = []
    offset = 0
    for role, tensors in (("param", checkpoint.params), ("buffer", checkpoint.buffers)):
        for name, array in tensors.items():
            array = np.asarray(array, dtype=np.float64)
            entries.append(
                TensorEntry(name=name, shape=list(array.shape), offset=offset, count=int(array.size), role=role)
            )
            blocks.append(array.ravel())
            offset += array.size

    payload = (np.concatenate(blocks) if blocks else np.zeros(0)).astype(PAYLOAD_DTYPE).tobytes()
    manifest = CheckpointManifest(
        format_version=checkpoint.format_version,
        kind=checkpoint.kind,
        config=checkpoint.config,
        seed=checkpoint.seed,
        feature_columns=checkpoint.feature_columns,
        positive_causes=checkpoint.positive_causes,
        standardizer=checkpoint.standardizer,
        log_digest=checkpoint.log_digest,
        tensors=entries,
        payload_sha256=_sha256_bytes(payload),
    )
    manifest_bytes = json.dumps(
        to_python_type(manifest.model_dump(mode="json")), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    header = MAGIC + b" " + str(len(manifest_bytes)).encode("ascii") + b"\n"

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".ckpt-", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header + manifest_bytes + payload)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)

    logger.info(f"Saved {checkpoint.kind} checkpoint ({offset} values) to {path}")
    return path


def read_manifest(raw: bytes) -> tuple[CheckpointManifest, bytes]:
    """Split a container into its manifest and payload bytes."""
    newline = raw.find(b"\n")
    if newline < 0 or not raw.startswith(MAGIC + b" "):
        raise IntegrityError("not a checkpoint container (bad header)")
    try:
        manifest_len = int(raw[len(MAGIC) + 1:newline].decode("ascii"))
    except ValueError as exc:
        raise IntegrityError("checkpoint header has no manifest length") from exc
    start = newline + 1
    if len(raw) < start + manifest_len:
        raise IntegrityError("checkpoint is truncated inside its manifest")
    try:
        manifest = CheckpointManifest.model_validate_json(raw[start:start + manifest_len])
    except ValidationError as exc:
        raise ManifestError(f"unreadable manifest: {exc.errors()[0]['msg']}") from exc
    return manifest, raw[start + manifest_len:]


def checkpoint_load(path: Union[str, Path]) -> ModelCheckpoint:
    """
    Read and verify a checkpoint.

    Raises:
        IntegrityError: Missing or truncated file, bad header
        CheckpointVersionError: Format version differs from the supported one
        ManifestError: Tensor table inconsistent with itself or the payload
        ChecksumError: Payload hash mismatch
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IntegrityError(f"cannot read checkpoint {path}: {exc}") from exc

    manifest, payload = read_manifest(raw)
    supported = get_settings().checkpoint_format_version
    if manifest.format_version != supported:
        raise CheckpointVersionError(
            f"checkpoint format version {manifest.format_version} is not supported (expected {supported})"
        )

    expected = 0
    for entry in manifest.tensors:
        if int(np.prod(entry.shape, dtype=np.int64)) != entry.count:
            raise ManifestError(f"{entry.name}: shape {entry.shape} does not hold {entry.count} values")
        if entry.offset != expected:
            raise ManifestError(f"{entry.name}: offset {entry.offset}, expected {expected}")
        expected += entry.count

    if len(payload) != expected * PAYLOAD_DTYPE.itemsize:
        raise IntegrityError(
            f"checkpoint payload is {len(payload)} bytes, manifest describes {expected * PAYLOAD_DTYPE.itemsize}"
        )
    if _sha256_bytes(payload) != manifest.payload_sha256:
        raise ChecksumError("checkpoint payload checksum mismatch")

    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)
    params: Dict[str, np.ndarray] = {}
    buffers: Dict[str, np.ndarray] = {}
    for entry in manifest.tensors:
        array = values[entry.offset:entry.offset + entry.count].reshape(entry.shape).copy()
        (params if entry.role == "param" else buffers)[entry.name] = array

    logger.info(f"Loaded {manifest.kind} checkpoint from {path}")
    return ModelCheckpoint(
        format_version=manifest.format_version,
        kind=manifest.kind,
        config=manifest.config,
        seed=manifest.seed,
        feature_columns=manifest.feature_columns,
        positive_causes=manifest.positive_causes,
        standardizer=manifest.standardizer,
        log_digest=manifest.log_digest,
        params=params,
        buffers=buffers,
    )


def restore_model(checkpoint: ModelCheckpoint):
    """Rebuild the model a checkpoint describes and load its tensors."""
    from app.services.forecasting import build_model

    try:
        model = build_model(checkpoint.kind, checkpoint.config, checkpoint.seed)
    except (ValueError, ValidationError) as exc:
        raise ManifestError(f"checkpoint config cannot rebuild a {checkpoint.kind!r} model: {exc}") from exc
    try:
        model.load_state_dict(checkpoint.state())
    except DimensionError as exc:
        raise ManifestError(f"checkpoint tensors do not fit the model: {exc.message}") from exc
    model.eval()
    return model
