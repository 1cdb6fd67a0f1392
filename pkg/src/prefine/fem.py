"""Periodic voxel FEM: element stiffness, mesh numbering, operator.

The unit cube is discretized into n^3 trilinear hexahedra of side
h = 1/n. Periodic wrap leaves n^3 unique nodes; node (i, j, k) gets id
(i*n + j)*n + k and DOF ids 3*id + component. Six Kronecker unit
macro strains drive the homogenization load cases. The global
operator is applied matrix-free from one cached solid element matrix;
rigid motions are fixed by pinning the three DOFs of node (0, 0, 0),
and DOFs fully inside void (zero stiffness diagonal) are pinned the
same way so the operator stays SPD on its free block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._validation import check_resolution, check_symmetric_6x6
from .geometry import VoxelModel
from .material import IsotropicMaterial, isotropic_tensor

__all__ = [
    "MACRO_STRAINS",
    "CORNER_OFFSETS",
    "strain_matrix",
    "element_stiffness",
    "corner_affine",
    "PeriodicMesh",
    "affine_field",
    "local_strains",
    "PeriodicSystem",
    "apply_operator",
    "load_vectors",
    "fields_to_grid",
    "grid_to_fields",
]

# Unit macro strains: row i is the Kronecker 6-vector e_i in Voigt
# order (xx, yy, zz, xy, xz, yz).
MACRO_STRAINS = np.eye(6, dtype=np.float64)

# Hexahedron corner order: bottom face counterclockwise, then top.
CORNER_OFFSETS = np.array(
    [
        (0, 0, 0),
        (1, 0, 0),
        (1, 1, 0),
        (0, 1, 0),
        (0, 0, 1),
        (1, 0, 1),
        (1, 1, 1),
        (0, 1, 1),
    ],
    dtype=np.int64,
)

_CORNER_SIGNS = 2.0 * CORNER_OFFSETS - 1.0
_GAUSS = 1.0 / np.sqrt(3.0)


def strain_matrix(strain6: np.ndarray) -> np.ndarray:
    """Symmetric 3x3 strain from a Voigt 6-vector (engineering shears)."""
    e = np.asarray(strain6, dtype=np.float64).reshape(6)
    return np.array(
        [
            [e[0], e[3] / 2.0, e[4] / 2.0],
            [e[3] / 2.0, e[1], e[5] / 2.0],
            [e[4] / 2.0, e[5] / 2.0, e[2]],
        ]
    )


def _shape_gradients(xi: float, eta: float, zeta: float, h: float) -> np.ndarray:
    """Physical gradients of the 8 trilinear shape functions, (8, 3)."""
    s = _CORNER_SIGNS
    grad = np.empty((8, 3))
    grad[:, 0] = s[:, 0] * (1 + s[:, 1] * eta) * (1 + s[:, 2] * zeta) / 8.0
    grad[:, 1] = s[:, 1] * (1 + s[:, 0] * xi) * (1 + s[:, 2] * zeta) / 8.0
    grad[:, 2] = s[:, 2] * (1 + s[:, 0] * xi) * (1 + s[:, 1] * eta) / 8.0
    # reference cube [-1, 1]^3 maps to [0, h]^3: d xi / dx = 2/h
    return grad * (2.0 / h)


def _b_matrix(xi: float, eta: float, zeta: float, h: float) -> np.ndarray:
    """Strain-displacement matrix (6, 24) at one quadrature point."""
    grad = _shape_gradients(xi, eta, zeta, h)
    b = np.zeros((6, 24))
    for a in range(8):
        dx, dy, dz = grad[a]
        col = 3 * a
        b[0, col] = dx
        b[1, col + 1] = dy
        b[2, col + 2] = dz
        b[3, col] = dy
        b[3, col + 1] = dx
        b[4, col] = dz
        b[4, col + 2] = dx
        b[5, col + 1] = dz
        b[5, col + 2] = dy
    return b


def element_stiffness(C: np.ndarray, h: float) -> np.ndarray:
    """Stiffness of one cubic voxel by full 2x2x2 Gauss quadrature.

    Returns a symmetric PSD 24x24 matrix whose null space holds the
    6 rigid motions; a zero stiffness tensor yields the zero matrix.
    """
    C = check_symmetric_6x6(C, "stiffness tensor")
    h = float(h)
    if h <= 0.0:
        raise ValueError(f"cell size must be positive, got {h}")
    det_j = (h / 2.0) ** 3
    ke = np.zeros((24, 24))
    for xi in (-_GAUSS, _GAUSS):
        for eta in (-_GAUSS, _GAUSS):
            for zeta in (-_GAUSS, _GAUSS):
                b = _b_matrix(xi, eta, zeta, h)
                ke += (b.T @ C @ b) * det_j
    return (ke + ke.T) / 2.0


def corner_affine(strain6: np.ndarray, h: float) -> np.ndarray:
    """Affine displacement of one element's corners, flattened to (24,).

    Corners sit at the element-local coordinates {0, h}^3, so this is
    the same vector for every element and is invariant to the rigid
    gauge of the global field.
    """
    eps = strain_matrix(strain6)
    corners = CORNER_OFFSETS * float(h)
    return (corners @ eps.T).ravel()


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """Periodic hexahedral voxel mesh on the unit cube.

    Fields are derived from ``resolution`` at construction:
    ``element_dofs`` maps each of the n^3 elements to its 24 global
    DOFs (8 wrapped corner nodes x 3 components), ``node_coords``
    holds node positions in [0, 1)^3, and ``constrained_dofs`` pins
    the three components of node (0, 0, 0).
    """

    resolution: int
    element_dofs: np.ndarray = field(init=False, repr=False)
    node_coords: np.ndarray = field(init=False, repr=False)
    constrained_dofs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = check_resolution(self.resolution)
        object.__setattr__(self, "resolution", n)
        idx = np.arange(n)
        ii, jj, kk = np.meshgrid(idx, idx, idx, indexing="ij")
        cols = []
        for cx, cy, cz in CORNER_OFFSETS:
            node = (((ii + cx) % n) * n + ((jj + cy) % n)) * n + ((kk + cz) % n)
            node = node.reshape(-1)
            cols.extend((3 * node, 3 * node + 1, 3 * node + 2))
        element_dofs = np.stack(cols, axis=-1)
        coords = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3) / n
        object.__setattr__(self, "element_dofs", element_dofs)
        object.__setattr__(self, "node_coords", coords)
        object.__setattr__(
            self, "constrained_dofs", np.array([0, 1, 2], dtype=np.int64)
        )
        for arr in (self.element_dofs, self.node_coords, self.constrained_dofs):
            arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.resolution**3

    @property
    def dof_count(self) -> int:
        return 3 * self.resolution**3

    @property
    def cell_size(self) -> float:
        return 1.0 / self.resolution


def affine_field(strain6: np.ndarray, mesh: PeriodicMesh) -> np.ndarray:
    """Nodal field u(x) = strain_matrix . x sampled at node coordinates.

    Note the sampled field is periodic only in its sampling, not in
    value: elements wrapping the far faces gather corner values from
    coordinate 0 rather than 1, so only the local per-element affine
    (``corner_affine``) reproduces constant strain on every element.
    """
    eps = strain_matrix(strain6)
    return (mesh.node_coords @ eps.T).ravel()


def local_strains(X: np.ndarray, mesh: PeriodicMesh) -> np.ndarray:
    """Element-centroid strains of a periodic nodal field, (n^3, 6)."""
    X = np.asarray(X, dtype=np.float64).reshape(mesh.dof_count)
    b_centroid = _b_matrix(0.0, 0.0, 0.0, mesh.cell_size)
    return X[mesh.element_dofs] @ b_centroid.T


class PeriodicSystem:
    """Matrix-free periodic elasticity operator K with its 6 load cases.

    Solid voxels share one cached element matrix; void voxels have
    zero stiffness and contribute nothing. Pinned DOFs (rigid-motion
    pin plus void-interior DOFs with zero diagonal) act as identity
    rows/columns, so the operator is SPD whenever the solid phase is
    connected and remains symmetric PSD otherwise.
    """

    def __init__(self, model: VoxelModel, mesh: PeriodicMesh | None = None):
        if mesh is None:
            mesh = PeriodicMesh(model.resolution)
        elif mesh.resolution != model.resolution:
            raise ValueError(
                f"mesh resolution {mesh.resolution} does not match model "
                f"resolution {model.resolution}"
            )
        self.model = model
        self.mesh = mesh
        self.ndof = mesh.dof_count

        C = isotropic_tensor(
            IsotropicMaterial(model.young_modulus, model.poisson_ratio)
        )
        self.element_matrix = element_stiffness(C, mesh.cell_size)
        solid = np.flatnonzero(model.occupancy.reshape(-1))
        self.solid_elements = solid
        self.solid_dofs = mesh.element_dofs[solid]

        diag = np.bincount(
            self.solid_dofs.ravel(),
            weights=np.broadcast_to(
                np.diag(self.element_matrix), self.solid_dofs.shape
            ).ravel(),
            minlength=self.ndof,
        )
        pinned = np.zeros(self.ndof, dtype=bool)
        pinned[mesh.constrained_dofs] = True
        pinned[diag <= 0.0] = True
        self.pinned_mask = pinned
        self.pinned_dofs = np.flatnonzero(pinned)
        diag = diag.copy()
        diag[pinned] = 1.0
        self._diagonal = diag

        self.load = self._assemble_loads()

    def _assemble_loads(self) -> np.ndarray:
        f = np.zeros((6, self.ndof))
        m = self.solid_dofs.shape[0]
        if m == 0:
            return f
        flat = self.solid_dofs.ravel()
        h = self.mesh.cell_size
        for i in range(6):
            fe = self.element_matrix @ corner_affine(MACRO_STRAINS[i], h)
            f[i] = np.bincount(
                flat,
                weights=np.broadcast_to(fe, (m, 24)).ravel(),
                minlength=self.ndof,
            )
            f[i, self.pinned_mask] = 0.0
        return f

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Operator product K X with identity on pinned DOFs."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape != (self.ndof,):
            raise ValueError(f"expected shape ({self.ndof},), got {X.shape}")
        x_free = X.copy()
        x_free[self.pinned_mask] = 0.0
        if self.solid_dofs.shape[0]:
            element_vals = x_free[self.solid_dofs] @ self.element_matrix
            y = np.bincount(
                self.solid_dofs.ravel(),
                weights=element_vals.ravel(),
                minlength=self.ndof,
            )
        else:
            y = np.zeros(self.ndof)
        y[self.pinned_mask] = X[self.pinned_mask]
        return y

    def diagonal(self) -> np.ndarray:
        """Diagonal of the pinned operator (1.0 on pinned DOFs)."""
        return self._diagonal.copy()

    def assemble_sparse(self) -> sp.csr_matrix:
        """Explicit CSR form of the pinned operator.

        Intended for stationary solvers, incomplete factorization, and
        small-system oracles; memory grows as 576 n^3 entries.
        """
        idx = self.solid_dofs
        m = idx.shape[0]
        if m:
            rows = np.repeat(idx, 24, axis=1).ravel()
            cols = np.tile(idx, (1, 24)).ravel()
            data = np.tile(self.element_matrix.ravel(), m)
            K = sp.coo_matrix(
                (data, (rows, cols)), shape=(self.ndof, self.ndof)
            ).tocsr()
        else:
            K = sp.csr_matrix((self.ndof, self.ndof))
        free = sp.diags((~self.pinned_mask).astype(np.float64))
        K = free @ K @ free + sp.diags(self.pinned_mask.astype(np.float64))
        return K.tocsr()


def apply_operator(system: PeriodicSystem, X: np.ndarray) -> np.ndarray:
    """Function form of :meth:`PeriodicSystem.apply`."""
    return system.apply(X)


def load_vectors(model: VoxelModel, mesh: PeriodicMesh | None = None) -> np.ndarray:
    """Six unit-strain right-hand sides as an array of shape (6, 3n^3)."""
    return PeriodicSystem(model, mesh).load.copy()


def fields_to_grid(fields: np.ndarray, n: int) -> np.ndarray:
    """Repack 6 solution vectors (6, 3n^3) as a grid [6, 3, n, n, n]."""
    fields = np.asarray(fields, dtype=np.float64).reshape(6, 3 * n**3)
    return np.ascontiguousarray(
        fields.reshape(6, n**3, 3).transpose(0, 2, 1).reshape(6, 3, n, n, n)
    )


def grid_to_fields(grid: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fields_to_grid`: grid [6, 3, n, n, n] to (6, 3n^3)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 5 or grid.shape[:2] != (6, 3):
        raise ValueError(f"expected shape (6, 3, n, n, n), got {grid.shape}")
    n = grid.shape[2]
    if grid.shape[3] != n or grid.shape[4] != n:
        raise ValueError(f"expected cubic grid, got {grid.shape}")
    return np.ascontiguousarray(
        grid.reshape(6, 3, n**3).transpose(0, 2, 1).reshape(6, 3 * n**3)
    )
