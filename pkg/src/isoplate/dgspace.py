"""Discrete spaces and their degrees of freedom.

Three spaces live on a :class:`~isoplate.mesh.TriMesh`:

* ``V``: discontinuous P2 deformations with 3 components (18 dofs per cell),
* ``M``: cellwise constant 3x2 matrices (6 dofs per cell, row-major),
* ``S``: cellwise constant symmetric 2x2 matrices stored as (g11, g22, g12).

The global vector is laid out block by block, ``[y | mu | gamma]``, and each
block is cell-contiguous. Inside a cell the V dofs are ordered
``6 * component + node``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .mesh import DIRICHLET, FREE, INTERIOR, TriMesh

V, M, S = "V", "M", "S"
DOFS_PER_CELL = {V: 18, M: 6, S: 3}

# P2 Lagrange nodes on the reference triangle: vertices then edge midpoints
REF_NODES = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)


def p2_values(xi: np.ndarray) -> np.ndarray:
    """Reference P2 basis at points ``xi`` (..., 2) -> (..., 6)."""
    s, t = xi[..., 0], xi[..., 1]
    l0, l1, l2 = 1 - s - t, s, t
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def p2_gradients(xi: np.ndarray) -> np.ndarray:
    """Reference gradients (..., 6, 2)."""
    s, t = xi[..., 0], xi[..., 1]
    l0 = 1 - s - t
    g0 = -(4 * l0 - 1)
    ds = np.stack([g0, 4 * s - 1, 0 * s, 4 * (l0 - s), 4 * t, -4 * t], axis=-1)
    dt = np.stack([g0, 0 * s, 4 * t - 1, -4 * s, 4 * s, 4 * (l0 - t)], axis=-1)
    return np.stack([ds, dt], axis=-1)


# Reference Hessians are constant: (6, 2, 2)
P2_HESSIANS = np.array(
    [
        [[4, 4], [4, 4]],
        [[4, 0], [0, 0]],
        [[0, 0], [0, 4]],
        [[-8, -4], [-4, 0]],
        [[0, 4], [4, 0]],
        [[0, -4], [-4, -8]],
    ],
    dtype=float,
)


@dataclasses.dataclass(frozen=True, eq=False)
class CellGeometry:
    """Affine maps ``x = origin + B xi`` of every cell."""

    origin: np.ndarray  # (n, 2)
    B: np.ndarray  # (n, 2, 2)
    Binv: np.ndarray  # (n, 2, 2)
    areas: np.ndarray  # (n,)

    @classmethod
    def of(cls, mesh: TriMesh) -> "CellGeometry":
        c = mesh.corners
        B = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
        return cls(c[:, 0].copy(), B, np.linalg.inv(B), mesh.areas)

    def to_reference(self, cells, x):
        return np.einsum("nij,nj->ni", self.Binv[cells], x - self.origin[cells])

    def to_physical(self, cells, xi):
        return self.origin[cells] + np.einsum("nij,nj->ni", self.B[cells], xi)

    def grad(self, cells, gref):
        """Map reference gradients (n, ..., 6, 2) to physical ones."""
        return np.einsum("n...ia,nab->n...ib", gref, self.Binv[cells])

    def hessians(self, cells=None) -> np.ndarray:
        """Physical Hessians of the 6 basis functions, (n, 6, 2, 2)."""
        Binv = self.Binv if cells is None else self.Binv[cells]
        return np.einsum("nac,iab,nbd->nicd", Binv, P2_HESSIANS, Binv)


@dataclasses.dataclass(frozen=True)
class DofMap:
    n_cells: int

    @property
    def n_y(self) -> int:
        return 18 * self.n_cells

    @property
    def n_mu(self) -> int:
        return 6 * self.n_cells

    @property
    def n_gamma(self) -> int:
        return 3 * self.n_cells

    @property
    def total(self) -> int:
        return 27 * self.n_cells

    @property
    def offsets(self) -> dict:
        return {V: 0, M: self.n_y, S: self.n_y + self.n_mu}

    def cell_dofs(self, space: str, cell: int) -> np.ndarray:
        k = DOFS_PER_CELL[space]
        return self.offsets[space] + k * cell + np.arange(k)

    def split(self, x: np.ndarray):
        """Views of the y, mu, gamma blocks of a global vector."""
        return x[: self.n_y], x[self.n_y : self.n_y + self.n_mu], x[self.n_y + self.n_mu :]


@dataclasses.dataclass
class FEFunction:
    space: str
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.coefficients) % DOFS_PER_CELL[self.space]:
            raise ValueError(f"coefficient length {len(self.coefficients)} does not fit space {self.space}")

    @property
    def n_cells(self) -> int:
        return len(self.coefficients) // DOFS_PER_CELL[self.space]

    def cellwise(self) -> np.ndarray:
        """Coefficients reshaped per cell: (n, 3, 6) for V, (n, 3, 2) for M, (n, 2, 2) for S."""
        c = self.coefficients
        if self.space == V:
            return c.reshape(-1, 3, 6)
        if self.space == M:
            return c.reshape(-1, 3, 2)
        g = c.reshape(-1, 3)
        return np.stack([np.stack([g[:, 0], g[:, 2]], -1), np.stack([g[:, 2], g[:, 1]], -1)], 1)

    def copy(self) -> "FEFunction":
        return FEFunction(self.space, self.coefficients.copy())


class DGSpace:
    """Basis evaluation, traces and interpolation on one mesh."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.geometry = CellGeometry.of(mesh)
        self.dofmap = DofMap(mesh.n_cells)
        self._hess = self.geometry.hessians()

    # -- whole-mesh helpers -------------------------------------------------

    def grads_at_barycenters(self) -> np.ndarray:
        """Physical basis gradients at barycenters, (n, 6, 2)."""
        n = self.mesh.n_cells
        gref = p2_gradients(np.full((n, 2), 1.0 / 3.0))
        return self.geometry.grad(np.arange(n), gref)

    def grad_at_barycenters(self, y: FEFunction) -> np.ndarray:
        """``grad y(x_T)`` for every cell, (n, 3, 2)."""
        return np.einsum("nki,nia->nka", y.cellwise(), self.grads_at_barycenters())

    @property
    def hessians(self) -> np.ndarray:
        return self._hess

    # -- pointwise evaluation -------------------------------------------------

    def _local(self, cell, point):
        cells = np.atleast_1d(cell)
        xi = self.geometry.to_reference(cells, np.atleast_2d(np.asarray(point, float)))
        return cells, xi

    def eval(self, y: FEFunction, cell: int, point) -> np.ndarray:
        cells, xi = self._local(cell, point)
        return np.einsum("ki,i->k", y.cellwise()[cells[0]], p2_values(xi[0]))

    def eval_grad(self, y: FEFunction, cell: int, point) -> np.ndarray:
        cells, xi = self._local(cell, point)
        g = self.geometry.grad(cells, p2_gradients(xi)[:, None])[0, 0]
        return y.cellwise()[cells[0]] @ g

    def eval_hessian(self, y: FEFunction, cell: int, point=None) -> np.ndarray:
        return np.einsum("ki,iab->kab", y.cellwise()[cell], self._hess[cell])

    # -- traces -------------------------------------------------------------

    def _check_skeleton(self, edge):
        if self.mesh.kinds[edge] == FREE:
            raise ValueError(f"edge {edge} is a free boundary edge and not part of the skeleton")

    def trace(self, y: FEFunction, edge: int, point):
        """Values and gradients from the minus and plus sides (plus is None on the boundary)."""
        self._check_skeleton(edge)
        out = []
        for cell in self.mesh.edge_cells[edge]:
            if cell < 0:
                out.append(None)
            else:
                out.append((self.eval(y, cell, point), self.eval_grad(y, cell, point), self.eval_hessian(y, cell)))
        return out

    def jump(self, y: FEFunction, edge: int, point) -> np.ndarray:
        minus, plus = self.trace(y, edge, point)
        return minus[0] if plus is None else minus[0] - plus[0]

    def jump_grad(self, y: FEFunction, edge: int, point) -> np.ndarray:
        n = self.mesh.normals[edge]
        minus, plus = self.trace(y, edge, point)
        g = minus[1] if plus is None else minus[1] - plus[1]
        return g @ n

    def average_hessian_nn(self, y: FEFunction, edge: int, point) -> np.ndarray:
        n = self.mesh.normals[edge]
        minus, plus = self.trace(y, edge, point)
        H = minus[2] if plus is None else 0.5 * (minus[2] + plus[2])
        return np.einsum("kab,a,b->k", H, n, n)

    # -- interpolation --------------------------------------------------------

    def node_coordinates(self) -> np.ndarray:
        """Physical P2 node positions, (n, 6, 2)."""
        c = self.mesh.corners
        return np.concatenate([c, 0.5 * (c + c[:, [1, 2, 0]])], axis=1)

    def interpolate(self, space: str, func) -> FEFunction:
        """Nodal interpolation into V, barycenter sampling into M and S.

        ``func`` maps an ``(m, 2)`` array of points to ``(m, 3)`` for V,
        ``(m, 3, 2)`` for M and ``(m, 2, 2)`` for S.
        """
        n = self.mesh.n_cells
        if space == V:
            x = self.node_coordinates().reshape(-1, 2)
            vals = np.asarray(func(x), float).reshape(n, 6, 3)
            return FEFunction(V, vals.transpose(0, 2, 1).reshape(-1))
        xb = self.mesh.barycenters
        vals = np.asarray(func(xb), float)
        if space == M:
            return FEFunction(M, vals.reshape(n, 3, 2).reshape(-1))
        if space == S:
            vals = vals.reshape(n, 2, 2)
            return FEFunction(S, np.stack([vals[:, 0, 0], vals[:, 1, 1], 0.5 * (vals[:, 0, 1] + vals[:, 1, 0])], 1).reshape(-1))
        raise ValueError(f"unknown space {space!r}")

    def zero(self, space: str) -> FEFunction:
        return FEFunction(space, np.zeros(DOFS_PER_CELL[space] * self.mesh.n_cells))


def flat_deformation(x: np.ndarray) -> np.ndarray:
    """(x1, x2) -> (x1, x2, 0)."""
    return np.column_stack([x[:, 0], x[:, 1], np.zeros(len(x))])


__all__ = [
    "V",
    "M",
    "S",
    "DofMap",
    "FEFunction",
    "DGSpace",
    "CellGeometry",
    "p2_values",
    "p2_gradients",
    "P2_HESSIANS",
    "REF_NODES",
    "flat_deformation",
    "INTERIOR",
    "DIRICHLET",
]
