"""Dataset access: manifests, sample grids, and channel statistics.

Samples come from a homogenization dataset directory: a
``manifest.json`` listing per-sample model/fields container files plus
optional per-channel normalization statistics. Inputs are 4-channel
voxel grids (Poisson ratio on solid voxels, zero on void, plus the
x/y/z voxel-center coordinates in [0, 1)); outputs are the 18 stored
displacement channels, one per load case and component
(channel = 3 * case + component).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import read_container, read_sidecar

__all__ = [
    "Manifest",
    "ManifestSample",
    "NormalizationStats",
    "channel_stats",
    "channels_to_fields",
    "fields_to_channels",
    "input_grid",
    "load_manifest",
    "relative_l2",
]

INPUT_CHANNELS = 4
OUTPUT_CHANNELS = 18


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b|| over flattened values; absolute when ||b|| = 0.

    This is the shared error metric: the same expression the solver
    component uses for its relative residual ||K X - f|| / ||f||.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    norm_b = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(a - b))
    return diff / norm_b if norm_b > 0.0 else diff


def input_grid(occupancy: np.ndarray, nu: float) -> np.ndarray:
    """Build the (n, n, n, 4) input: nu-coded occupancy + coordinates."""
    occ = np.asarray(occupancy, dtype=np.float64)
    if occ.ndim != 3 or len(set(occ.shape)) != 1:
        raise ValueError(f"occupancy must be a cubic rank-3 grid, got {occ.shape}")
    n = occ.shape[0]
    centers = (np.arange(n, dtype=np.float64) + 0.5) / n
    x, y, z = np.meshgrid(centers, centers, centers, indexing="ij")
    return np.stack([float(nu) * occ, x, y, z], axis=-1)


def fields_to_channels(fields: np.ndarray) -> np.ndarray:
    """(6, 3, n, n, n) load-case fields -> (n, n, n, 18) channels."""
    fields = np.asarray(fields, dtype=np.float64)
    if fields.ndim != 5 or fields.shape[:2] != (6, 3):
        raise ValueError(
            f"fields must have shape (6, 3, n, n, n), got {fields.shape}"
        )
    n = fields.shape[2]
    return np.transpose(fields.reshape(OUTPUT_CHANNELS, n, n, n), (1, 2, 3, 0))


def channels_to_fields(grid: np.ndarray) -> np.ndarray:
    """(n, n, n, 18) channels -> (6, 3, n, n, n) load-case fields."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 4 or grid.shape[-1] != OUTPUT_CHANNELS:
        raise ValueError(
            f"grid must have shape (n, n, n, {OUTPUT_CHANNELS}), got {grid.shape}"
        )
    n = grid.shape[0]
    return np.transpose(grid, (3, 0, 1, 2)).reshape(6, 3, n, n, n)


def channel_stats(grids) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std over channel-last grids; zero std maps to 1."""
    count = 0
    total = None
    total_sq = None
    for grid in grids:
        flat = np.asarray(grid, dtype=np.float64).reshape(-1, np.shape(grid)[-1])
        if total is None:
            total = flat.sum(axis=0)
            total_sq = (flat**2).sum(axis=0)
        else:
            total += flat.sum(axis=0)
            total_sq += (flat**2).sum(axis=0)
        count += flat.shape[0]
    if count == 0:
        raise ValueError("channel_stats needs at least one grid")
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0)
    std = np.sqrt(var)
    std[std == 0.0] = 1.0
    return mean, std


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel affine normalization for inputs and outputs."""

    output_mean: np.ndarray
    output_std: np.ndarray
    input_mean: np.ndarray
    input_std: np.ndarray

    def __post_init__(self):
        for name, size in (
            ("output_mean", OUTPUT_CHANNELS),
            ("output_std", OUTPUT_CHANNELS),
            ("input_mean", INPUT_CHANNELS),
            ("input_std", INPUT_CHANNELS),
        ):
            arr = _read_only(getattr(self, name))
            if arr.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        for name in ("output_std", "input_std"):
            if np.any(getattr(self, name) <= 0.0):
                raise ValueError(f"{name} must be positive")

    def normalize_inputs(self, grid: np.ndarray) -> np.ndarray:
        return (np.asarray(grid, dtype=np.float64) - self.input_mean) / self.input_std

    def normalize_outputs(self, grid: np.ndarray) -> np.ndarray:
        return (np.asarray(grid, dtype=np.float64) - self.output_mean) / self.output_std

    def denormalize_outputs(self, grid: np.ndarray) -> np.ndarray:
        return np.asarray(grid, dtype=np.float64) * self.output_std + self.output_mean

    def to_json_dict(self) -> dict:
        return {
            "output_mean": self.output_mean.tolist(),
            "output_std": self.output_std.tolist(),
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "NormalizationStats":
        return cls(
            output_mean=np.asarray(payload["output_mean"], dtype=np.float64),
            output_std=np.asarray(payload["output_std"], dtype=np.float64),
            input_mean=np.asarray(payload["input_mean"], dtype=np.float64),
            input_std=np.asarray(payload["input_std"], dtype=np.float64),
        )


@dataclass(frozen=True)
class ManifestSample:
    """One dataset sample: stored model and solved fields."""

    id: int
    model_path: Path
    fields_path: Path
    n: int
    nu: float
    family: str | None = None
    network: str | None = None
    volume_fraction: float | None = None

    def input_grid(self) -> np.ndarray:
        """(n, n, n, 4) input channels for this sample."""
        occupancy = read_container(self.model_path)
        if occupancy.shape != (self.n, self.n, self.n):
            raise ValueError(
                f"{self.model_path}: expected a {self.n}^3 model grid, "
                f"got {occupancy.shape}"
            )
        return input_grid(occupancy, self.nu)

    def output_grid(self) -> np.ndarray:
        """(n, n, n, 18) stored displacement channels."""
        fields = read_container(self.fields_path)
        n = self.n
        if fields.shape != (6, 3, n, n, n):
            raise ValueError(
                f"{self.fields_path}: expected fields of shape (6, 3, {n}, {n}, "
                f"{n}), got {fields.shape}"
            )
        return fields_to_channels(fields)


@dataclass(frozen=True)
class Manifest:
    """Parsed dataset manifest with resolved file paths."""

    root: Path
    samples: tuple[ManifestSample, ...]
    output_stats: dict | None = None

    def resolution(self) -> int:
        sizes = {s.n for s in self.samples}
        if len(sizes) != 1:
            raise ValueError(f"samples mix resolutions {sorted(sizes)}")
        return sizes.pop()


def load_manifest(path) -> Manifest:
    """Parse and validate a dataset manifest."""
    path = Path(path)
    with open(path) as fh:
        payload = json.load(fh)
    root = path.parent
    records = payload.get("samples", [])
    if not records:
        raise ValueError(f"{path}: manifest lists no samples")
    samples = []
    seen: set[int] = set()
    for record in records:
        sample_id = int(record["id"])
        if sample_id in seen:
            raise ValueError(f"{path}: duplicate sample id {sample_id}")
        seen.add(sample_id)
        model_path = root / record["model_file"]
        fields_path = root / record["fields_file"]
        for ref in (model_path, fields_path):
            if not ref.exists():
                raise ValueError(f"{path}: referenced file {ref} does not exist")
        samples.append(
            ManifestSample(
                id=sample_id,
                model_path=model_path,
                fields_path=fields_path,
                n=int(record["n"]),
                nu=float(record["nu"]),
                family=record.get("family"),
                network=record.get("network"),
                volume_fraction=record.get("volume_fraction"),
            )
        )
    stats = payload.get("normalization")
    if stats is not None:
        mean = np.asarray(stats["mean"], dtype=np.float64)
        std = np.asarray(stats["std"], dtype=np.float64)
        if mean.shape != (OUTPUT_CHANNELS,) or std.shape != (OUTPUT_CHANNELS,):
            raise ValueError(
                f"{path}: normalization block must carry {OUTPUT_CHANNELS} "
                "mean/std channels"
            )
        stats = {"mean": mean, "std": std}
    return Manifest(root=root, samples=tuple(samples), output_stats=stats)
