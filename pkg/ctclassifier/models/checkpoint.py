"""
Checkpoint serialization.

File layout (all integers little-endian):

    b"CTCV"                       magic
    u8                            format version
    u32                           header length
    header                        UTF-8 JSON: model spec, meta, blob dtype, parameter table
    blobs                         raw parameter data in layer order (weights before bias)
    8 bytes                       BLAKE2b-64 digest of everything between version and digest
"""

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ctclassifier.errors import (
    BadMagicError,
    CheckpointError,
    ChecksumMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from ctclassifier.models.network import Network, check_params_match
from ctclassifier.models.zoo import ModelSpec
from ctclassifier.nn.params import ParamSet
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"CTCV"
FORMAT_VERSION = 1
DIGEST_SIZE = 8
BLOB_DTYPES = {"float32": "<f4", "float64": "<f8"}

PathLike = Union[str, Path]


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class CheckpointMeta:
    seed: int = 0
    epochs_trained: int = 0
    created_at: str = field(default_factory=utc_timestamp)
    format_version: int = FORMAT_VERSION


@dataclass
class Checkpoint:
    model_spec: ModelSpec
    params: ParamSet
    meta: CheckpointMeta = field(default_factory=CheckpointMeta)

    def validate(self):
        check_params_match(self.model_spec, self.params)

    def network(self) -> Network:
        return Network(self.model_spec, self.params)


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=DIGEST_SIZE).digest()


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    """Serialize a checkpoint (parameters are written in the model spec's blob dtype)."""
    blob_dtype = np.dtype(BLOB_DTYPES[ckpt.model_spec.dtype])
    table: List[Dict[str, Any]] = []
    blobs: List[bytes] = []
    for index, name, tensor in ckpt.params.items():
        data = np.ascontiguousarray(tensor, dtype=blob_dtype)
        table.append({"layer": index, "name": name, "shape": list(data.shape)})
        blobs.append(data.tobytes())

    header = json.dumps({
        "model_spec": ckpt.model_spec.to_dict(),
        "meta": asdict(ckpt.meta),
        "blob_dtype": blob_dtype.str,
        "frozen": sorted(ckpt.params.frozen),
        "layers": len(ckpt.params),
        "params": table,
    }, sort_keys=True).encode("utf-8")

    body = struct.pack("<I", len(header)) + header + b"".join(blobs)
    return MAGIC + struct.pack("<B", FORMAT_VERSION) + body + _digest(body)


def _parse(data: bytes) -> Tuple[Dict[str, Any], ParamSet]:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagicError("bad magic: not a checkpoint file")
    if len(data) < len(MAGIC) + 1:
        raise TruncatedCheckpointError("truncated checkpoint: missing format version")
    version = data[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")

    start = len(MAGIC) + 1
    if len(data) < start + 4:
        raise TruncatedCheckpointError("truncated checkpoint: missing header length")
    (header_len,) = struct.unpack_from("<I", data, start)
    header_end = start + 4 + header_len
    if len(data) < header_end + DIGEST_SIZE:
        raise TruncatedCheckpointError(f"truncated checkpoint: header needs {header_len} bytes")

    def verify_digest(body_end: int):
        if _digest(data[start:body_end]) != data[body_end:body_end + DIGEST_SIZE]:
            raise ChecksumMismatchError("checkpoint checksum mismatch: payload is corrupted")

    try:
        header = json.loads(data[start + 4:header_end].decode("utf-8"))
        blob_dtype = np.dtype(header["blob_dtype"])
        table = header["params"]
        expected_payload = sum(int(np.prod(p["shape"], dtype=np.int64)) for p in table) * blob_dtype.itemsize
    except (ValueError, KeyError, TypeError) as e:
        verify_digest(len(data) - DIGEST_SIZE)
        raise CheckpointError(f"malformed checkpoint header: {e}") from None

    body_end = header_end + expected_payload
    if len(data) < body_end + DIGEST_SIZE:
        raise TruncatedCheckpointError(
            f"truncated checkpoint: expected {body_end + DIGEST_SIZE} bytes, found {len(data)}"
        )
    if len(data) > body_end + DIGEST_SIZE:
        verify_digest(len(data) - DIGEST_SIZE)
        raise CheckpointError(f"checkpoint has {len(data) - body_end - DIGEST_SIZE} trailing bytes")
    verify_digest(body_end)

    layers: List[Dict[str, np.ndarray]] = [{} for _ in range(header["layers"])]
    offset = header_end
    for entry in table:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        array = np.frombuffer(data, dtype=blob_dtype, count=count, offset=offset)
        layers[entry["layer"]][entry["name"]] = array.reshape(entry["shape"]).astype(blob_dtype.newbyteorder("="))
        offset += count * blob_dtype.itemsize
    return header, ParamSet(layers, header.get("frozen", ()))


def checkpoint_from_bytes(data: bytes, validate: bool = True) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        BadMagicError, VersionMismatchError, TruncatedCheckpointError,
        ChecksumMismatchError, SpecMismatchError (when validate is set)
    """
    header, params = _parse(data)
    ckpt = Checkpoint(
        model_spec=ModelSpec.from_dict(header["model_spec"]),
        params=params,
        meta=CheckpointMeta(**header["meta"]),
    )
    if validate:
        ckpt.validate()
    return ckpt


def save_checkpoint(ckpt: Checkpoint, path: PathLike):
    path = Path(path)
    if path.parent:
        path.parent.mkdir(parents=True, exist_ok=True)
    data = checkpoint_to_bytes(ckpt)
    path.write_bytes(data)
    logger.info(f"Saved checkpoint {path} ({len(data)} bytes, {ckpt.params.count()} parameters)")


def load_checkpoint(path: PathLike, validate: bool = True) -> Checkpoint:
    path = Path(path)
    ckpt = checkpoint_from_bytes(path.read_bytes(), validate=validate)
    logger.info(f"Loaded checkpoint {path}: {ckpt.model_spec.name}, {ckpt.meta.epochs_trained} epochs trained")
    return ckpt


def params_equal(a: ParamSet, b: ParamSet) -> bool:
    """Bit-exact comparison of two parameter sets."""
    left = list(a.items())
    right = list(b.items())
    if len(left) != len(right):
        return False
    for (i, n, x), (j, m, y) in zip(left, right):
        if (i, n) != (j, m) or x.dtype != y.dtype or x.shape != y.shape or x.tobytes() != y.tobytes():
            return False
    return True


def describe_checkpoint(ckpt: Checkpoint, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    summary = {
        "model": ckpt.model_spec.name,
        "input_shape": list(ckpt.model_spec.input_shape),
        "parameters": ckpt.params.count(),
        **asdict(ckpt.meta),
    }
    summary.update(extra or {})
    return summary
