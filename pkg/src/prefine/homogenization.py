"""Effective tensors from solved fields, error matrices, calibration.

The effective stiffness entry (i, j) is the mutual strain energy of
load cases i and j summed over solid elements: with X0 the shared
per-element affine corner field of unit strain i and X_i the solved
periodic fluctuation field, E_ij = sum_e (X0_i - X_i)^T k_e
(X0_j - X_j) over the unit cell (volume 1). Evaluating the energies
element-wise keeps the result consistent with the discretization and
symmetric by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_symmetric_6x6
from .fem import MACRO_STRAINS, PeriodicSystem, corner_affine, grid_to_fields
from .geometry import VoxelModel

__all__ = [
    "HomogenizedTensor",
    "ErrorMatrix",
    "ScalingFactor",
    "model_hash",
    "homogenized_tensor",
    "relative_error_matrix",
    "calibrate_scaling",
    "apply_scaling",
]

_PSD_SLACK = 1e-8


def model_hash(model: VoxelModel) -> str:
    """Stable hex digest of occupancy, resolution, and material knobs."""
    digest = hashlib.sha256()
    digest.update(f"{model.resolution}:{model.poisson_ratio!r}:".encode())
    digest.update(f"{model.young_modulus!r}:".encode())
    digest.update(np.packbits(model.occupancy.reshape(-1)).tobytes())
    return digest.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class HomogenizedTensor:
    """Effective 6x6 stiffness with provenance metadata."""

    matrix: np.ndarray
    model_hash: str = ""
    solver_tol: float | None = None
    scaled: bool = False

    def __post_init__(self) -> None:
        m = check_symmetric_6x6(self.matrix, "effective tensor")
        scale = max(float(np.abs(m).max()), 1.0)
        eigs = np.linalg.eigvalsh((m + m.T) / 2.0)
        if eigs.min() < -_PSD_SLACK * scale:
            raise ValueError(
                f"effective tensor is not positive semidefinite "
                f"(min eigenvalue {eigs.min():.3e})"
            )
        object.__setattr__(self, "matrix", m)
        self.matrix.setflags(write=False)

    def to_json_dict(self) -> dict:
        return {
            "matrix": [float(v) for v in self.matrix.reshape(-1)],
            "model_hash": self.model_hash,
            "solver_tol": self.solver_tol,
            "scaled": self.scaled,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "HomogenizedTensor":
        matrix = np.asarray(payload["matrix"], dtype=np.float64).reshape(6, 6)
        return cls(
            matrix=matrix,
            model_hash=payload.get("model_hash", ""),
            solver_tol=payload.get("solver_tol"),
            scaled=bool(payload.get("scaled", False)),
        )


@dataclass(frozen=True, eq=False)
class ErrorMatrix:
    """Entrywise relative errors; masked entries had near-zero reference."""

    values: np.ndarray
    mask: np.ndarray  # True where excluded

    @property
    def mean_error(self) -> float:
        kept = self.values[~self.mask]
        return float(kept.mean()) if kept.size else float("nan")

    def to_json_dict(self) -> dict:
        return {
            "values": [float(v) for v in self.values.reshape(-1)],
            "mask": [bool(v) for v in self.mask.reshape(-1)],
            "mean_error": self.mean_error,
        }


@dataclass(frozen=True, eq=False)
class ScalingFactor:
    """Per-entry multiplicative calibration fit on (pred, truth) pairs."""

    values: np.ndarray
    mask: np.ndarray  # True where undefined
    train_count: int

    def to_json_dict(self) -> dict:
        return {
            "values": [float(v) for v in self.values.reshape(-1)],
            "mask": [bool(v) for v in self.mask.reshape(-1)],
            "train_count": self.train_count,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ScalingFactor":
        return cls(
            values=np.asarray(payload["values"], dtype=np.float64).reshape(6, 6),
            mask=np.asarray(payload["mask"], dtype=bool).reshape(6, 6),
            train_count=int(payload["train_count"]),
        )


def _matrix_of(tensor) -> np.ndarray:
    if isinstance(tensor, HomogenizedTensor):
        return tensor.matrix
    return check_symmetric_6x6(tensor, "tensor")


def homogenized_tensor(
    model: VoxelModel,
    fields: np.ndarray,
    solver_tol: float | None = None,
    system: PeriodicSystem | None = None,
) -> HomogenizedTensor:
    """Assemble the effective stiffness from the six solved fields.

    ``fields`` holds the periodic fluctuation solutions, either as six
    DOF vectors (6, 3n^3) or as a grid (6, 3, n, n, n).
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.ndim == 5:
        fields = grid_to_fields(fields)
    if system is None:
        system = PeriodicSystem(model)
    elif system.model is not model:
        raise ValueError("system was built for a different model")
    ndof = system.ndof
    if fields.shape != (6, ndof):
        raise ValueError(
            f"fields must have shape (6, {ndof}) or (6, 3, n, n, n), "
            f"got {fields.shape}"
        )

    h = system.mesh.cell_size
    x0 = np.stack([corner_affine(MACRO_STRAINS[i], h) for i in range(6)])
    # per-element energy differences over solid elements only
    diff = x0[:, None, :] - fields[:, system.solid_dofs]
    weighted = diff @ system.element_matrix
    matrix = np.empty((6, 6))
    for i in range(6):
        for j in range(i, 6):
            value = float(np.sum(diff[i] * weighted[j]))
            matrix[i, j] = matrix[j, i] = value
    return HomogenizedTensor(
        matrix=matrix, model_hash=model_hash(model), solver_tol=solver_tol
    )


def relative_error_matrix(
    pred, ref, mask_threshold: float = 1e-3
) -> ErrorMatrix:
    """Entrywise |pred - ref| / |ref|, masking near-zero reference entries."""
    if mask_threshold < 0.0:
        raise ValueError(f"mask_threshold must be >= 0, got {mask_threshold}")
    p = _matrix_of(pred)
    r = _matrix_of(ref)
    mask = np.abs(r) < mask_threshold * float(np.abs(r).max())
    mask |= r == 0.0  # relative error is undefined there regardless
    values = np.zeros((6, 6))
    values[~mask] = np.abs(p[~mask] - r[~mask]) / np.abs(r[~mask])
    return ErrorMatrix(values=values, mask=mask)


def calibrate_scaling(
    pairs: Sequence[tuple], mask_threshold: float = 1e-3
) -> ScalingFactor:
    """Mean truth/pred ratio per entry over predicted/true tensor pairs.

    Entries whose reference magnitude falls below ``mask_threshold``
    times the per-pair maximum (or whose prediction does) in any pair
    are masked out as undefined.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (pred, truth) pair")
    ratios = np.zeros((6, 6))
    mask = np.zeros((6, 6), dtype=bool)
    for pred, truth in pairs:
        p = _matrix_of(pred)
        t = _matrix_of(truth)
        small = (np.abs(t) < mask_threshold * float(np.abs(t).max())) | (
            np.abs(p) < mask_threshold * float(np.abs(p).max())
        )
        small |= (t == 0.0) | (p == 0.0)
        mask |= small
        safe_p = np.where(small, 1.0, p)
        ratios += np.where(small, 0.0, t / safe_p)
    values = np.where(mask, 1.0, ratios / len(pairs))
    return ScalingFactor(values=values, mask=mask, train_count=len(pairs))


def apply_scaling(pred, factor: ScalingFactor) -> HomogenizedTensor:
    """Multiply unmasked entries of a predicted tensor by the factor."""
    p = _matrix_of(pred)
    scaled = np.where(factor.mask, p, p * factor.values)
    meta_hash = getattr(pred, "model_hash", "")
    tol = getattr(pred, "solver_tol", None)
    return HomogenizedTensor(
        matrix=scaled, model_hash=meta_hash, solver_tol=tol, scaled=True
    )
