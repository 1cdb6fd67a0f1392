"""Reader/writer for the self-describing binary array format.

Layout: magic "PFHT", then little-endian u32 version (= 1), u32 dtype
code (1 = float32, 2 = float64), u32 rank, rank u64 dims, then the
row-major little-endian IEEE-754 payload. This is an independent
implementation of the exchange format used by the homogenization
pipeline; compatibility rests on the byte layout alone, not on shared
code.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "ContainerError",
    "read_container",
    "write_container",
    "sidecar_path",
    "read_sidecar",
]

MAGIC = b"PFHT"
VERSION = 1
_CODE_TO_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_KIND_TO_CODE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


class ContainerError(ValueError):
    """Malformed or mismatching container file."""


def write_container(path, array: np.ndarray, dtype=None) -> None:
    """Write an array; non-float inputs are stored as float64."""
    arr = np.asarray(array)
    if dtype is not None:
        arr = arr.astype(dtype)
    if arr.dtype not in _KIND_TO_CODE:
        arr = arr.astype(np.float64)
    code = _KIND_TO_CODE[np.dtype(arr.dtype)]
    arr = np.ascontiguousarray(arr, dtype=_CODE_TO_DTYPE[code])
    header = MAGIC + struct.pack("<III", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_container(path) -> np.ndarray:
    """Read and validate a container; returns a native-order array."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ContainerError(
                f"{path}: bad magic {magic!r}, expected {MAGIC!r}"
            )
        head = fh.read(12)
        if len(head) != 12:
            raise ContainerError(f"{path}: truncated header")
        version, code, rank = struct.unpack("<III", head)
        if version != VERSION:
            raise ContainerError(
                f"{path}: unsupported version {version}, expected {VERSION}"
            )
        if code not in _CODE_TO_DTYPE:
            raise ContainerError(f"{path}: unknown dtype code {code}")
        dims_raw = fh.read(8 * rank)
        if len(dims_raw) != 8 * rank:
            raise ContainerError(f"{path}: truncated dims for rank {rank}")
        dims = struct.unpack(f"<{rank}Q", dims_raw)
        dtype = _CODE_TO_DTYPE[code]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = fh.read()
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise ContainerError(
            f"{path}: payload holds {len(payload)} bytes, expected "
            f"{expected} for dims {dims}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return np.ascontiguousarray(arr.astype(dtype.newbyteorder("=")))


def sidecar_path(path) -> Path:
    """JSON sidecar location for a container file."""
    return Path(str(path) + ".json")


def read_sidecar(path) -> dict:
    """Load a container's JSON sidecar; {} when absent."""
    side = sidecar_path(path)
    if not side.exists():
        return {}
    with open(side) as fh:
        return json.load(fh)
