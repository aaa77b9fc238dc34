"""Writer/reader for the MFP1 feature-file format.

This is the only contract with the fingerprinting core, implemented here
independently from it. Layout, little-endian: magic "MFP1" (4 bytes),
kind length (u8), kind (utf-8), rank (u8, 2 or 3), shape (u32 per axis),
payload (f32, row-major).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MFP1"


def write_array(path: str | Path, values: np.ndarray, kind: str) -> None:
    values = np.asarray(values)
    if values.ndim not in (2, 3):
        raise ValueError(f"MFP1 stores rank-2 or rank-3 arrays, got rank {values.ndim}")
    if values.size == 0:
        raise ValueError("refusing to write an empty array")
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write NaN/Inf values")
    kind_bytes = kind.encode("utf-8")
    if not 0 < len(kind_bytes) < 256:
        raise ValueError("kind tag must be 1..255 utf-8 bytes")
    header = MAGIC + struct.pack("<B", len(kind_bytes)) + kind_bytes + struct.pack("<B", values.ndim)
    header += struct.pack(f"<{values.ndim}I", *values.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_array(path: str | Path) -> tuple[np.ndarray, str]:
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise ValueError(f"not an MFP1 file: {path}")
    pos = 4
    kind_len = raw[pos]
    pos += 1
    kind = raw[pos : pos + kind_len].decode("utf-8")
    pos += kind_len
    rank = raw[pos]
    pos += 1
    shape = struct.unpack(f"<{rank}I", raw[pos : pos + 4 * rank])
    pos += 4 * rank
    payload = raw[pos:]
    if len(payload) != int(np.prod(shape)) * 4:
        raise ValueError(f"payload/shape mismatch in {path}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape), kind
