"""Self-describing binary array files and voxel-model persistence.

Layout: magic "PFHT", then little-endian u32 version (= 1), u32 dtype
code (1 = float32, 2 = float64), u32 rank, rank u64 dims, then the
row-major little-endian IEEE-754 payload. The reader verifies every
header field and the exact payload length, so truncated or foreign
files fail loudly rather than decode to garbage.

Voxel models travel as a rank-3 {0, 1} array plus a JSON sidecar
(`<path>.json`) carrying generation metadata and the material knobs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .geometry import VoxelModel, volume_fraction

__all__ = [
    "ContainerError",
    "read_container",
    "write_container",
    "sidecar_path",
    "save_model",
    "load_model",
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


def save_model(model: VoxelModel, path, meta: dict | None = None) -> None:
    """Write occupancy as a {0, 1} container plus the JSON sidecar."""
    write_container(path, model.occupancy.astype(np.float32))
    sidecar = {
        "family": None,
        "network": None,
        "c": None,
        "n": model.resolution,
        "nu": model.poisson_ratio,
        "E": model.young_modulus,
        "volume_fraction": volume_fraction(model),
        "seed": None,
    }
    sidecar.update(meta or {})
    with open(sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[VoxelModel, dict]:
    """Read a model container and its sidecar back into a VoxelModel."""
    arr = read_container(path)
    if arr.ndim != 3:
        raise ContainerError(
            f"{path}: model container must be rank 3, got rank {arr.ndim}"
        )
    n = arr.shape[0]
    if arr.shape != (n, n, n):
        raise ContainerError(f"{path}: model grid must be cubic, got {arr.shape}")
    side = sidecar_path(path)
    if not side.exists():
        raise ContainerError(f"{side}: missing model sidecar")
    with open(side) as fh:
        meta = json.load(fh)
    model = VoxelModel(
        resolution=n,
        occupancy=arr > 0.5,
        poisson_ratio=float(meta["nu"]),
        young_modulus=float(meta.get("E", 1.0)),
    )
    return model, meta
