"""Portable binary tensor files.

Layout: 4-byte magic ``NIL1``, uint32 ndim, uint32 dims[ndim], then the
payload as little-endian float32 in C order. The header is 16 bytes for the
common 2-D case. Everything is explicit little-endian so files round-trip
across platforms and languages.
"""

import os
import struct

import numpy as np

from .errors import DimensionError

MAGIC = b"NIL1"
_MAX_NDIM = 8


def save_tensor(path, array) -> None:
    """Write ``array`` as a portable float32 tensor, atomically."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim == 0 or arr.ndim > _MAX_NDIM:
        raise DimensionError(f"tensor rank {arr.ndim} outside 1..{_MAX_NDIM}")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())
    os.replace(tmp, path)


def load_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`save_tensor`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise DimensionError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (ndim,) = struct.unpack("<I", fh.read(4))
        if ndim == 0 or ndim > _MAX_NDIM:
            raise DimensionError(f"{path}: bad rank {ndim}")
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        count = int(np.prod(dims))
        data = np.frombuffer(fh.read(4 * count), dtype="<f4", count=count)
    return data.reshape(dims).copy()


def cache_dir() -> str | None:
    """Derived-data cache root from NIL_CACHE_DIR, or None when unset."""
    path = os.environ.get("NIL_CACHE_DIR")
    if not path:
        return None
    os.makedirs(path, exist_ok=True)
    return path
