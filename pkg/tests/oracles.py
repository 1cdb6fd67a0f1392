"""Independent reference implementations used as test oracles.

Everything here is written from first principles with deliberately
different conventions than the package: lexicographic corner ordering,
3x3x3 Gauss quadrature, dict-based dense assembly, and explicit
componentwise solver update loops. Agreement between these and the
package is therefore evidence, not tautology.
"""

from __future__ import annotations

import numpy as np

# Corners in lexicographic (i, j, k) order, unlike the package's
# bottom-face-counterclockwise ordering.
LEX_CORNERS = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]


def isotropic_voigt(young: float, poisson: float) -> np.ndarray:
    """Closed-form isotropic stiffness in engineering Voigt notation."""
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    c = np.zeros((6, 6))
    c[:3, :3] = lam
    c[np.diag_indices(3)] = lam + 2.0 * mu
    c[3, 3] = c[4, 4] = c[5, 5] = mu
    return c


def _lex_shape_gradients(xi: np.ndarray, h: float) -> np.ndarray:
    """(8, 3) gradients of the trilinear shape functions on [0, h]^3.

    N_c(x) = prod_d (x_d/h if corner bit set else 1 - x_d/h), evaluated
    at the physical point xi.
    """
    t = xi / h
    grads = np.zeros((8, 3))
    for c, corner in enumerate(LEX_CORNERS):
        for d in range(3):
            g = 1.0 / h if corner[d] else -1.0 / h
            for other in range(3):
                if other == d:
                    continue
                g *= t[other] if corner[other] else 1.0 - t[other]
            grads[c, d] = g
    return grads


def _lex_b_matrix(xi: np.ndarray, h: float) -> np.ndarray:
    """(6, 24) strain-displacement matrix, engineering shears."""
    grads = _lex_shape_gradients(xi, h)
    b = np.zeros((6, 24))
    for c in range(8):
        gx, gy, gz = grads[c]
        col = 3 * c
        b[0, col] = gx
        b[1, col + 1] = gy
        b[2, col + 2] = gz
        b[3, col] = gy
        b[3, col + 1] = gx
        b[4, col] = gz
        b[4, col + 2] = gx
        b[5, col + 1] = gz
        b[5, col + 2] = gy
    return b


def lex_element_stiffness(c6: np.ndarray, h: float) -> np.ndarray:
    """24x24 element stiffness via 3x3x3 Gauss on [0, h]^3, lex order."""
    pts, wts = np.polynomial.legendre.leggauss(3)
    pts = (pts + 1.0) * (h / 2.0)
    wts = wts * (h / 2.0)
    ke = np.zeros((24, 24))
    for px, wx in zip(pts, wts):
        for py, wy in zip(pts, wts):
            for pz, wz in zip(pts, wts):
                b = _lex_b_matrix(np.array([px, py, pz]), h)
                ke += (wx * wy * wz) * (b.T @ c6 @ b)
    return ke


def lex_corner_affine(strain: np.ndarray, h: float) -> np.ndarray:
    """24-vector: u = eps_matrix . x at the corners of [0, h]^3."""
    eps = np.array(
        [
            [strain[0], strain[3] / 2.0, strain[4] / 2.0],
            [strain[3] / 2.0, strain[1], strain[5] / 2.0],
            [strain[4] / 2.0, strain[5] / 2.0, strain[2]],
        ]
    )
    out = np.zeros(24)
    for c, corner in enumerate(LEX_CORNERS):
        out[3 * c : 3 * c + 3] = eps @ (np.array(corner) * h)
    return out


def _node_id(i: int, j: int, k: int, n: int) -> int:
    return ((i % n) * n + (j % n)) * n + (k % n)


def element_dof_ids(e: tuple[int, int, int], n: int) -> np.ndarray:
    """24 global DOF ids of element e's corners, lex corner order."""
    i, j, k = e
    dofs = []
    for ci, cj, ck in LEX_CORNERS:
        node = _node_id(i + ci, j + cj, k + ck, n)
        dofs.extend((3 * node, 3 * node + 1, 3 * node + 2))
    return np.array(dofs)


def dense_system(model) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense pinned stiffness K, loads f (6, ndof), pinned mask.

    Element-by-element dict-free dense assembly with the oracle's own
    element matrix; node (0, 0, 0) and zero-diagonal DOFs act as
    identity rows/columns, and loads vanish there.
    """
    n = model.resolution
    h = 1.0 / n
    ndof = 3 * n**3
    c6 = isotropic_voigt(model.young_modulus, model.poisson_ratio)
    ke = lex_element_stiffness(c6, h)
    x0 = np.stack([lex_corner_affine(np.eye(6)[i], h) for i in range(6)])
    big = np.zeros((ndof, ndof))
    loads = np.zeros((6, ndof))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if not model.occupancy[i, j, k]:
                    continue
                dofs = element_dof_ids((i, j, k), n)
                big[np.ix_(dofs, dofs)] += ke
                for case in range(6):
                    loads[case, dofs] += ke @ x0[case]
    pinned = np.diag(big) <= 0.0
    pinned[:3] = True
    big[pinned, :] = 0.0
    big[:, pinned] = 0.0
    big[pinned, pinned] = 1.0
    loads[:, pinned] = 0.0
    return big, loads, pinned


def dense_homogenized(model) -> np.ndarray:
    """6x6 effective tensor via dense assembly + direct solve + direct sum."""
    n = model.resolution
    h = 1.0 / n
    c6 = isotropic_voigt(model.young_modulus, model.poisson_ratio)
    ke = lex_element_stiffness(c6, h)
    x0 = np.stack([lex_corner_affine(np.eye(6)[i], h) for i in range(6)])
    big, loads, _ = dense_system(model)
    # lstsq tolerates the rigid modes of solid islands disconnected from
    # the pinned node; mutual energies are gauge-invariant anyway.
    sols = np.linalg.lstsq(big, loads.T, rcond=None)[0].T
    out = np.zeros((6, 6))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if not model.occupancy[i, j, k]:
                    continue
                dofs = element_dof_ids((i, j, k), n)
                diff = x0 - sols[:, dofs]
                out += diff @ ke @ diff.T
    return out


def jacobi_step(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Textbook componentwise Jacobi update."""
    out = np.zeros_like(x)
    for i in range(len(x)):
        s = b[i]
        for j in range(len(x)):
            if j != i:
                s -= a[i, j] * x[j]
        out[i] = s / a[i, i]
    return out


def damped_jacobi_step(
    a: np.ndarray, b: np.ndarray, x: np.ndarray, alpha: float
) -> np.ndarray:
    return x + alpha * (jacobi_step(a, b, x) - x)


def gauss_seidel_step(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Textbook in-place forward sweep."""
    out = x.copy()
    for i in range(len(x)):
        s = b[i]
        for j in range(len(x)):
            if j != i:
                s -= a[i, j] * out[j]
        out[i] = s / a[i, i]
    return out


def sor_step(
    a: np.ndarray, b: np.ndarray, x: np.ndarray, omega: float
) -> np.ndarray:
    """Textbook successive over-relaxation sweep."""
    out = x.copy()
    for i in range(len(x)):
        s = b[i]
        for j in range(len(x)):
            if j != i:
                s -= a[i, j] * out[j]
        out[i] = (1.0 - omega) * out[i] + omega * s / a[i, i]
    return out


def trilinear_sample(grid: np.ndarray, point: np.ndarray) -> float:
    """Periodic trilinear interpolation of a scalar (m, m, m) node grid."""
    m = grid.shape[0]
    u = np.asarray(point, dtype=float) * m
    base = np.floor(u).astype(int)
    frac = u - base
    total = 0.0
    for ci, cj, ck in LEX_CORNERS:
        w = (
            (frac[0] if ci else 1.0 - frac[0])
            * (frac[1] if cj else 1.0 - frac[1])
            * (frac[2] if ck else 1.0 - frac[2])
        )
        total += w * grid[(base[0] + ci) % m, (base[1] + cj) % m, (base[2] + ck) % m]
    return total


def random_model(rng: np.random.Generator, n: int = 4, nu: float = 0.3):
    """Random two-phase model guaranteed to contain solid at the origin."""
    from prefine import VoxelModel

    occupancy = rng.random((n, n, n)) < 0.6
    occupancy[0, 0, 0] = True
    return VoxelModel(n, occupancy, nu, 1.0)
