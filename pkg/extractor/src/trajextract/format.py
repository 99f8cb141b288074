"""Producer side of the trajectory interchange format.

Layout (little-endian): magic "DPTJ", u32 version = 1, u32 T, u32 dim,
u32 dtype code (0 = float32), then (T+1)*dim float32 values ordered
t = T..0, then an optional u32-length-prefixed UTF-8 JSON metadata block.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"DPTJ"
VERSION = 1
DTYPE_F32LE = 0

_HEADER = struct.Struct("<4sIIII")


def write_trajectory_file(path, features: np.ndarray, metadata: dict | None = None) -> None:
    """Write (T+1, dim) features, row 0 = timestep T ... row T = sentinel."""
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2 or features.shape[0] < 3:
        raise ValueError(f"expected (T+1, dim) features with T >= 2, got {features.shape}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    total_steps = features.shape[0] - 1
    dim = features.shape[1]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, total_steps, dim, DTYPE_F32LE))
        fh.write(features.astype("<f4").tobytes())
        if metadata is not None:
            blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)) + blob)
