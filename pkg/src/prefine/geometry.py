"""Periodic microstructure generation on the unit cube.

Two generator families are provided: triply periodic minimal surface
(TPMS) lattices defined by trigonometric level sets, and Gaussian
random field (GRF) porous structures built from superposed cosine
waves. Both are voxelized by testing membership at voxel centers
((i + 1/2)/n per axis), which keeps sampling unbiased on the periodic
cell.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import (
    check_fraction,
    check_occupancy,
    check_poisson,
    check_resolution,
    check_young,
)

__all__ = [
    "TpmsFamily",
    "Network",
    "LevelSetSpec",
    "VoxelModel",
    "GrfSpec",
    "evaluate_level_set",
    "voxel_centers",
    "voxelize",
    "solve_level_for_fraction",
    "generate_grf",
    "grf_field",
    "volume_fraction",
]

TWO_PI = 2.0 * np.pi


class TpmsFamily(enum.Enum):
    """Level-set families; values double as their CLI names."""

    SCHWARZ_PRIMITIVE = "primitive"
    SCHOEN_GYROID = "gyroid"
    SCHWARZ_DIAMOND = "diamond"
    FISCHER_KOCH_S = "fks"


class Network(enum.Enum):
    """Which side of the level set counts as solid material."""

    SOLID = "solid"
    SHEET = "sheet"


@dataclass(frozen=True)
class LevelSetSpec:
    """A TPMS surface pick: family, network type, and level value.

    Solid networks take the region where the level-set value exceeds
    ``level``; sheet networks take the band where its magnitude is at
    most ``level`` (hence ``level`` must be non-negative for sheets).
    """

    family: TpmsFamily
    network: Network
    level: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "level", float(self.level))
        if self.network is Network.SHEET and self.level < 0.0:
            raise ValueError(
                f"sheet networks need level >= 0, got {self.level}"
            )


@dataclass(frozen=True, eq=False)
class VoxelModel:
    """Periodic unit-cube voxel grid with one isotropic solid phase.

    ``occupancy[i, j, k]`` is True where voxel (i, j, k) is solid; the
    cell size is h = 1/resolution and the domain volume is 1.
    """

    resolution: int
    occupancy: np.ndarray
    poisson_ratio: float
    young_modulus: float = 1.0

    def __post_init__(self) -> None:
        n = check_resolution(self.resolution)
        object.__setattr__(self, "resolution", n)
        object.__setattr__(
            self, "occupancy", check_occupancy(self.occupancy, n)
        )
        object.__setattr__(
            self, "poisson_ratio", check_poisson(self.poisson_ratio, positive=True)
        )
        object.__setattr__(self, "young_modulus", check_young(self.young_modulus))
        self.occupancy.setflags(write=False)

    @property
    def cell_size(self) -> float:
        return 1.0 / self.resolution


@dataclass(frozen=True)
class GrfSpec:
    """Gaussian-random-field recipe: wave count, seed, target porosity."""

    wave_count: int
    seed: int
    target_porosity: float

    def __post_init__(self) -> None:
        if int(self.wave_count) < 1:
            raise ValueError(f"wave_count must be >= 1, got {self.wave_count}")
        object.__setattr__(self, "wave_count", int(self.wave_count))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(
            self,
            "target_porosity",
            check_fraction(self.target_porosity, "target_porosity"),
        )


def evaluate_level_set(family: TpmsFamily, point: np.ndarray) -> np.ndarray:
    """Evaluate a TPMS level-set function at points on the unit cell.

    Parameters
    ----------
    family : TpmsFamily
        Which trigonometric surface to evaluate.
    point : array_like, shape (..., 3)
        Coordinates; the functions are 1-periodic per axis, so any
        finite values are accepted.

    Returns
    -------
    ndarray of shape (...)
        The scalar level-set value at each point.
    """
    p = np.asarray(point, dtype=np.float64)
    x, y, z = TWO_PI * p[..., 0], TWO_PI * p[..., 1], TWO_PI * p[..., 2]
    if family is TpmsFamily.SCHWARZ_PRIMITIVE:
        return np.cos(x) + np.cos(y) + np.cos(z)
    if family is TpmsFamily.SCHOEN_GYROID:
        return (
            np.sin(x) * np.cos(y) + np.sin(y) * np.cos(z) + np.sin(z) * np.cos(x)
        )
    if family is TpmsFamily.SCHWARZ_DIAMOND:
        return (
            np.cos(x) * np.cos(y) * np.cos(z) - np.sin(x) * np.sin(y) * np.sin(z)
        )
    if family is TpmsFamily.FISCHER_KOCH_S:
        return (
            np.cos(2 * x) * np.sin(y) * np.cos(z)
            + np.cos(x) * np.cos(2 * y) * np.sin(z)
            + np.sin(x) * np.cos(y) * np.cos(2 * z)
        )
    raise ValueError(f"unknown family {family!r}")


def voxel_centers(n: int) -> np.ndarray:
    """Voxel-center coordinates of an n-per-axis grid, shape (n, n, n, 3)."""
    n = check_resolution(n)
    axis = (np.arange(n) + 0.5) / n
    gi, gj, gk = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([gi, gj, gk], axis=-1)


def _membership(phi: np.ndarray, network: Network, level: float) -> np.ndarray:
    if network is Network.SOLID:
        return phi > level
    if level < 0.0:
        raise ValueError(f"sheet networks need level >= 0, got {level}")
    return np.abs(phi) <= level


def voxelize(
    spec: LevelSetSpec,
    n: int,
    poisson_ratio: float,
    young_modulus: float = 1.0,
) -> VoxelModel:
    """Voxelize a TPMS spec by membership tests at voxel centers."""
    n = check_resolution(n)
    phi = evaluate_level_set(spec.family, voxel_centers(n))
    occupancy = _membership(phi, spec.network, spec.level)
    return VoxelModel(n, occupancy, poisson_ratio, young_modulus)


def solve_level_for_fraction(
    family: TpmsFamily,
    network: Network,
    target_vf: float,
    n: int,
    tol: float = 0.005,
    max_steps: int = 100,
) -> float:
    """Find the level value whose voxelization hits a volume fraction.

    Bisects on the level. Voxel fractions are quantized to multiples
    of 1/n^3, so the result achieves ``target_vf`` within ``tol`` or,
    failing that, the closest fraction attainable at resolution n (a
    warning is emitted in that case). Solid-network fraction is
    non-increasing in the level, sheet-network fraction non-decreasing
    for levels >= 0, so bisection is exact up to quantization.
    """
    target_vf = check_fraction(target_vf, "target_vf")
    n = check_resolution(n)
    phi = evaluate_level_set(family, voxel_centers(n))
    total = phi.size

    if network is Network.SOLID:

        def fraction(c: float) -> float:
            return np.count_nonzero(phi > c) / total

        # fraction is non-increasing in c; orient lo -> high fraction
        lo, hi = float(phi.min()) - 1.0, float(phi.max()) + 1.0
    else:

        def fraction(c: float) -> float:
            return np.count_nonzero(np.abs(phi) <= c) / total

        # fraction is non-decreasing for c >= 0
        lo, hi = float(np.abs(phi).max()) + 1.0, 0.0

    best_c, best_err = lo, abs(fraction(lo) - target_vf)
    err_hi = abs(fraction(hi) - target_vf)
    if err_hi < best_err:
        best_c, best_err = hi, err_hi
    for _ in range(max_steps):
        if best_err == 0.0:
            return best_c
        mid = 0.5 * (lo + hi)
        f_mid = fraction(mid)
        err = abs(f_mid - target_vf)
        if err < best_err:
            best_c, best_err = mid, err
        if f_mid >= target_vf:
            lo = mid
        else:
            hi = mid
    if best_err > tol:
        warnings.warn(
            f"level search for fraction {target_vf} at n={n} stopped at "
            f"fraction error {best_err:.3g} (> {tol}); fractions are "
            f"quantized to 1/{total}",
            stacklevel=2,
        )
    return best_c


def grf_field(
    wave_vectors: np.ndarray, phases: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Sum of cosine waves cos(2 pi k.x + psi) over points (..., 3)."""
    k = np.asarray(wave_vectors, dtype=np.float64).reshape(-1, 3)
    psi = np.asarray(phases, dtype=np.float64).reshape(-1)
    p = np.asarray(points, dtype=np.float64)
    dots = p @ k.T
    return np.cos(TWO_PI * dots + psi).sum(axis=-1)


def _draw_waves(rng: np.random.Generator, wave_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw integer wave-vectors in [-4, 4]^3 minus the origin, plus phases."""
    k = rng.integers(-4, 5, size=(wave_count, 3))
    zero = ~np.any(k, axis=1)
    while np.any(zero):
        k[zero] = rng.integers(-4, 5, size=(int(zero.sum()), 3))
        zero = ~np.any(k, axis=1)
    phases = rng.uniform(0.0, TWO_PI, size=wave_count)
    return k, phases


def generate_grf(
    spec: GrfSpec,
    n: int,
    poisson_ratio: float,
    young_modulus: float = 1.0,
) -> VoxelModel:
    """Generate a periodic porous structure from a random cosine field.

    The field is a sum of ``spec.wave_count`` cosines with integer
    wave-vectors (uniform over [-4, 4]^3 minus the origin) and uniform
    phases, both drawn from a generator seeded with ``spec.seed``. The
    solid set is {F >= t} with t the empirical (1 - target_porosity)
    quantile of F over voxel centers, so the achieved porosity matches
    the target up to 1/n^3 rounding. Deterministic given the seed.
    """
    n = check_resolution(n)
    rng = np.random.default_rng(spec.seed)
    wave_vectors, phases = _draw_waves(rng, spec.wave_count)
    values = grf_field(wave_vectors, phases, voxel_centers(n))

    total = values.size
    void_count = int(round(spec.target_porosity * total))
    if void_count <= 0:
        occupancy = np.ones_like(values, dtype=bool)
    elif void_count >= total:
        occupancy = np.zeros_like(values, dtype=bool)
    else:
        threshold = np.partition(values.ravel(), void_count)[void_count]
        occupancy = values >= threshold
    return VoxelModel(n, occupancy, poisson_ratio, young_modulus)


def volume_fraction(model: VoxelModel) -> float:
    """Solid voxel count over total voxel count."""
    return float(np.count_nonzero(model.occupancy) / model.occupancy.size)
