"""Versioned binary checkpoint container.

Layout (little-endian): 8-byte magic, u32 version, u64 JSON length + UTF-8
JSON metadata blob (configs, step, RNG states), u64 tensor count, then per
tensor a u16 name length, the name, u8 ndim, u64 dims and raw float64 data.
The final 8 bytes are a CRC-64/XZ of everything before them.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError

CKPT_MAGIC = b"SSPCCKPT"
CKPT_VERSION = 1

_CRC64_POLY = 0xC96C5795D7870F42  # CRC-64/XZ, reflected
_CRC64_TABLE: list[int] = []


def _crc64_table() -> list[int]:
    if not _CRC64_TABLE:
        for byte in range(256):
            crc = byte
            for _ in range(8):
                crc = (crc >> 1) ^ _CRC64_POLY if crc & 1 else crc >> 1
            _CRC64_TABLE.append(crc)
    return _CRC64_TABLE


def crc64(data: bytes) -> int:
    """CRC-64/XZ over ``data``."""
    table = _crc64_table()
    crc = 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


@dataclass
class Checkpoint:
    """Everything needed to resume training bit-exactly."""

    meta: dict  # JSON-serializable: configs, step, rng states, queue, best-val
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    chunks = [CKPT_MAGIC, struct.pack("<I", CKPT_VERSION)]
    meta_bytes = json.dumps(ckpt.meta, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<Q", len(meta_bytes)))
    chunks.append(meta_bytes)
    chunks.append(struct.pack("<Q", len(ckpt.tensors)))
    for name in sorted(ckpt.tensors):
        tensor = np.ascontiguousarray(ckpt.tensors[name], dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.ndim))
        for dim in tensor.shape:
            chunks.append(struct.pack("<Q", dim))
        chunks.append(tensor.tobytes(order="C"))
    body = b"".join(chunks)
    payload = body + struct.pack("<Q", crc64(body))
    Path(path).write_bytes(payload)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 8 + 4 + 8 + 8 + 8:
        raise DataError(f"{path.name}: file too small to be a checkpoint")
    body, trailer = raw[:-8], raw[-8:]
    (stored_crc,) = struct.unpack("<Q", trailer)
    if crc64(body) != stored_crc:
        raise DataError(f"{path.name}: checksum mismatch (corrupt or truncated file)")
    view = memoryview(body)
    if bytes(view[:8]) != CKPT_MAGIC:
        raise DataError(f"{path.name}: bad magic")
    (version,) = struct.unpack_from("<I", view, 8)
    if version != CKPT_VERSION:
        raise DataError(f"{path.name}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<Q", view, 12)
    offset = 20
    meta = json.loads(bytes(view[offset : offset + meta_len]).decode("utf-8"))
    offset += meta_len
    (n_tensors,) = struct.unpack_from("<Q", view, offset)
    offset += 8
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", view, offset)
        offset += 1
        shape = []
        for _ in range(ndim):
            (dim,) = struct.unpack_from("<Q", view, offset)
            offset += 8
            shape.append(dim)
        count = int(np.prod(shape)) if shape else 1
        tensor = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        tensors[name] = tensor.reshape(shape).copy()
    return Checkpoint(meta=meta, tensors=tensors)


def validate_tensor_shapes(
    tensors: dict[str, np.ndarray], expected: dict[str, tuple[int, ...]], context: str
) -> None:
    """Every expected tensor must be present with exactly the expected shape."""
    for name, shape in expected.items():
        if name not in tensors:
            raise ShapeError(f"{context}: missing tensor {name!r}")
        if tuple(tensors[name].shape) != shape:
            raise ShapeError(
                f"{context}: tensor {name!r} has shape {tuple(tensors[name].shape)}, "
                f"expected {shape}"
            )
