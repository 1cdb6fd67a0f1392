"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_resolution(n: int) -> int:
    """Validate a voxel grid resolution and return it as a plain int."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"resolution must be an integer, got {type(n).__name__}")
    n = int(n)
    if n < 2:
        raise ValueError(f"resolution must be >= 2, got {n}")
    return n


def check_poisson(nu: float, positive: bool = False) -> float:
    """Validate a Poisson ratio for a stable isotropic solid.

    The thermodynamic range is (-1, 0.5); voxel models additionally
    require nu > 0 (``positive=True``).
    """
    nu = float(nu)
    lo = 0.0 if positive else -1.0
    if not lo < nu < 0.5:
        raise ValueError(f"poisson ratio must lie in ({lo}, 0.5), got {nu}")
    return nu


def check_young(E: float) -> float:
    """Validate a Young modulus."""
    E = float(E)
    if not E > 0.0:
        raise ValueError(f"young modulus must be positive, got {E}")
    return E


def check_fraction(x: float, name: str) -> float:
    """Validate a quantity required to lie strictly inside (0, 1)."""
    x = float(x)
    if not 0.0 < x < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {x}")
    return x


def check_occupancy(occupancy: np.ndarray, n: int) -> np.ndarray:
    """Validate an occupancy array: boolean, shape (n, n, n), C order."""
    occupancy = np.asarray(occupancy)
    if occupancy.dtype != np.bool_:
        raise TypeError(f"occupancy must be boolean, got dtype {occupancy.dtype}")
    if occupancy.shape != (n, n, n):
        raise ValueError(
            f"occupancy shape {occupancy.shape} does not match resolution {n}"
        )
    return np.ascontiguousarray(occupancy)


def check_symmetric_6x6(a: np.ndarray, name: str, tol: float = 1e-8) -> np.ndarray:
    """Validate a 6x6 symmetric matrix of finite floats."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (6, 6):
        raise ValueError(f"{name} must have shape (6, 6), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise ValueError(f"{name} is not symmetric within tolerance {tol}")
    return a
