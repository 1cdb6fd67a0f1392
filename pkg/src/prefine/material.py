"""Isotropic elastic stiffness in 6x6 engineering (Voigt) notation.

Component order is (xx, yy, zz, xy, xz, yz) with engineering shear
strains (gamma = 2 eps), so the shear diagonal carries the shear
modulus mu. Void voxels map to the exact zero tensor; any null-space
consequences are handled by the FEM and solver layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_poisson, check_young
from .geometry import VoxelModel

__all__ = ["IsotropicMaterial", "isotropic_tensor", "voxel_tensor"]


@dataclass(frozen=True)
class IsotropicMaterial:
    """Young modulus and Poisson ratio of one isotropic solid."""

    young_modulus: float
    poisson_ratio: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "young_modulus", check_young(self.young_modulus))
        object.__setattr__(self, "poisson_ratio", check_poisson(self.poisson_ratio))


def isotropic_tensor(material: IsotropicMaterial) -> np.ndarray:
    """Stiffness matrix of an isotropic solid from its Lame constants.

    lambda = E nu / ((1 + nu)(1 - 2 nu)) and mu = E / (2 (1 + nu));
    the normal block is lambda + 2 mu on the diagonal and lambda off
    it, the shear diagonal is mu.
    """
    E, nu = material.young_modulus, material.poisson_ratio
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    c = np.zeros((6, 6), dtype=np.float64)
    c[:3, :3] = lam
    c[0, 0] = c[1, 1] = c[2, 2] = lam + 2.0 * mu
    c[3, 3] = c[4, 4] = c[5, 5] = mu
    return c


def voxel_tensor(model: VoxelModel, index: tuple[int, int, int]) -> np.ndarray:
    """Local stiffness of one voxel: the solid tensor or exact zeros."""
    i, j, k = index
    n = model.resolution
    if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
        raise IndexError(f"voxel index {index} out of range for resolution {n}")
    if model.occupancy[i, j, k]:
        return isotropic_tensor(
            IsotropicMaterial(model.young_modulus, model.poisson_ratio)
        )
    return np.zeros((6, 6), dtype=np.float64)
