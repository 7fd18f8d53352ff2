"""Assembly of the interior-penalty forms and the saddle-point blocks.

All bending terms act componentwise, so they are assembled once for a scalar
P2 field (6 dofs per cell) and expanded to the three deformation components.
Skeleton integrals run over interior and Dirichlet edges only; penalty
weights use the edge length.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import stiefel
from .dgspace import DGSpace, FEFunction, M, S, V, p2_gradients, p2_values
from .mesh import DIRICHLET, INTERIOR, segment_rule, triangle_rule


@dataclasses.dataclass(frozen=True)
class PenaltyParams:
    eta0: float = 100.0
    eta1: float = 100.0

    def __post_init__(self):
        if self.eta0 < 0 or self.eta1 < 0:
            raise ValueError("penalty parameters must be non-negative")


@dataclasses.dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data on the clamped edges.

    ``y_D(x)`` maps points (m, 2) to positions (m, 3); ``G_D(x, n)`` maps points
    and outward normals to the prescribed normal derivative (m, 3).
    """

    y_D: Callable[[np.ndarray], np.ndarray]
    G_D: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @classmethod
    def zero(cls) -> "BoundaryData":
        return cls(lambda x: np.zeros((len(x), 3)), lambda x, n: np.zeros((len(x), 3)))

    @classmethod
    def flat(cls) -> "BoundaryData":
        return cls(_flat_position, _in_plane_normal)

    @classmethod
    def compressed_strip(cls, amount: float) -> "BoundaryData":
        """Ends of a strip centred at x1 = 0 pushed inward by ``amount`` each."""
        amount = float(amount)

        def y_D(x):
            out = _flat_position(x)
            out[:, 0] -= np.sign(x[:, 0]) * amount
            return out

        return cls(y_D, _in_plane_normal)


def _flat_position(x):
    return np.column_stack([x[:, 0], x[:, 1], np.zeros(len(x))])


def _in_plane_normal(x, n):
    return np.column_stack([n[:, 0], n[:, 1], np.zeros(len(n))])


# ---------------------------------------------------------------------------
# edge traces


@dataclasses.dataclass(frozen=True, eq=False)
class _Side:
    cells: np.ndarray  # (ne,)
    values: np.ndarray  # (ne, q, 6)
    dn: np.ndarray  # (ne, q, 6) normal derivative
    hnn: np.ndarray  # (ne, 6) double normal contraction of the Hessian


@dataclasses.dataclass(frozen=True, eq=False)
class EdgeTraces:
    edges: np.ndarray
    points: np.ndarray  # (ne, q, 2)
    weights: np.ndarray  # (ne, q), include the edge length
    normals: np.ndarray  # (ne, 2)
    h: np.ndarray  # (ne,)
    minus: _Side
    plus: _Side | None


def _side(space: DGSpace, cells, points, normals) -> _Side:
    geo = space.geometry
    ne, q, _ = points.shape
    rep = np.repeat(cells, q)
    xi = geo.to_reference(rep, points.reshape(-1, 2))
    vals = p2_values(xi).reshape(ne, q, 6)
    grads = geo.grad(rep, p2_gradients(xi)).reshape(ne, q, 6, 2)
    dn = np.einsum("eqia,ea->eqi", grads, normals)
    hnn = np.einsum("eiab,ea,eb->ei", space.hessians[cells], normals, normals)
    return _Side(cells, vals, dn, hnn)


def edge_traces(space: DGSpace, kind: int) -> EdgeTraces:
    mesh = space.mesh
    edges = mesh.edges_of_kind(kind)
    rule = segment_rule()
    p0 = mesh.vertices[mesh.edges[edges, 0]]
    p1 = mesh.vertices[mesh.edges[edges, 1]]
    pts = p0[:, None, :] + rule.points[None, :, None] * (p1 - p0)[:, None, :]
    h = mesh.lengths[edges]
    w = rule.weights[None, :] * h[:, None]
    n = mesh.normals[edges]
    minus = _side(space, mesh.edge_cells[edges, 0], pts, n)
    plus = _side(space, mesh.edge_cells[edges, 1], pts, n) if kind == INTERIOR else None
    return EdgeTraces(edges, pts, w, n, h, minus, plus)


def _edge_jumps(tr: EdgeTraces):
    """Jump and average tables over the local dofs of each edge."""
    if tr.plus is None:
        return tr.minus.values, tr.minus.dn, tr.minus.hnn, tr.minus.cells[:, None]
    J0 = np.concatenate([tr.minus.values, -tr.plus.values], axis=2)
    J1 = np.concatenate([tr.minus.dn, -tr.plus.dn], axis=2)
    avg = 0.5 * np.concatenate([tr.minus.hnn, tr.plus.hnn], axis=1)
    return J0, J1, avg, np.stack([tr.minus.cells, tr.plus.cells], axis=1)


def _scalar_dofs(cells):
    # cells (ne, s) -> (ne, 6 s)
    return (6 * cells[:, :, None] + np.arange(6)).reshape(len(cells), -1)


def _expand_vector_rows(idx):
    """Scalar dof 6t+i -> the three V dofs 18t+6k+i, shape (..., 3)."""
    t, i = np.divmod(idx, 6)
    return 18 * t[..., None] + 6 * np.arange(3) + i[..., None]


def _expand_scalar_matrix(K: sp.coo_matrix, n_cells: int) -> sp.csr_matrix:
    K = K.tocoo()
    r = _expand_vector_rows(K.row)
    c = _expand_vector_rows(K.col)
    data = np.repeat(K.data[:, None], 3, axis=1)
    return sp.csr_matrix((data.ravel(), (r.ravel(), c.ravel())), shape=(18 * n_cells, 18 * n_cells))


# ---------------------------------------------------------------------------
# bending form


def scalar_bending_matrix(space: DGSpace, params: PenaltyParams, consistency: bool = True) -> sp.csr_matrix:
    """Scalar IPDG matrix on 6 dofs per cell."""
    n = space.mesh.n_cells
    areas = space.geometry.areas
    H = space.hessians
    rows, cols, vals = [], [], []

    Kc = areas[:, None, None] * np.einsum("niab,njab->nij", H, H)
    dofs = _scalar_dofs(np.arange(n)[:, None])
    rows.append(np.repeat(dofs, 6, axis=1).ravel())
    cols.append(np.tile(dofs, (1, 6)).ravel())
    vals.append(Kc.ravel())

    for kind in (INTERIOR, DIRICHLET):
        tr = edge_traces(space, kind)
        if len(tr.edges) == 0:
            continue
        J0, J1, avg, cells = _edge_jumps(tr)
        w = tr.weights
        K = params.eta0 * np.einsum("eq,eqi,eqj->eij", w / tr.h[:, None] ** 3, J0, J0)
        K += params.eta1 * np.einsum("eq,eqi,eqj->eij", w / tr.h[:, None], J1, J1)
        if consistency:
            cons = np.einsum("eq,eqi->ei", w, J1)
            K -= cons[:, :, None] * avg[:, None, :] + avg[:, :, None] * cons[:, None, :]
        d = _scalar_dofs(cells)
        m = d.shape[1]
        rows.append(np.repeat(d, m, axis=1).ravel())
        cols.append(np.tile(d, (1, m)).ravel())
        vals.append(K.ravel())

    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(6 * n, 6 * n)
    ).tocsr()
    # duplicate summation order differs between (i, j) and (j, i); make it exact
    return (0.5 * (K + K.T)).tocsr()


def assemble_a_h(space: DGSpace, params: PenaltyParams) -> sp.csr_matrix:
    """The (y, y) block: broken Hessian product, consistency and penalty terms."""
    return _expand_scalar_matrix(scalar_bending_matrix(space, params), space.mesh.n_cells)


def assemble_F_h(space: DGSpace, params: PenaltyParams, data: BoundaryData) -> np.ndarray:
    """Weak Dirichlet functional on the y block."""
    n = space.mesh.n_cells
    F = np.zeros(18 * n)
    tr = edge_traces(space, DIRICHLET)
    if len(tr.edges) == 0:
        return F
    ne, q, _ = tr.points.shape
    x = tr.points.reshape(-1, 2)
    yD = np.asarray(data.y_D(x), float).reshape(ne, q, 3)
    GD = np.asarray(data.G_D(x, np.repeat(tr.normals, q, axis=0)), float).reshape(ne, q, 3)
    s = tr.minus
    w = tr.weights
    loc = -np.einsum("eq,eqk,ei->eki", w, GD, s.hnn)
    loc += params.eta1 * np.einsum("eq,eqk,eqi->eki", w / tr.h[:, None], GD, s.dn)
    loc += params.eta0 * np.einsum("eq,eqk,eqi->eki", w / tr.h[:, None] ** 3, yD, s.values)
    idx = 18 * s.cells[:, None, None] + 6 * np.arange(3)[None, :, None] + np.arange(6)[None, None, :]
    np.add.at(F, idx.ravel(), loc.ravel())
    return F


def boundary_data_offset(space: DGSpace, params: PenaltyParams, data: BoundaryData) -> float:
    """Data-only constant ``eta0 int h^-3 |y_D|^2 + eta1 int h^-1 |G_D|^2`` over Dirichlet edges."""
    tr = edge_traces(space, DIRICHLET)
    if len(tr.edges) == 0:
        return 0.0
    ne, q, _ = tr.points.shape
    x = tr.points.reshape(-1, 2)
    yD = np.asarray(data.y_D(x), float).reshape(ne, q, 3)
    GD = np.asarray(data.G_D(x, np.repeat(tr.normals, q, axis=0)), float).reshape(ne, q, 3)
    w = tr.weights
    return float(
        params.eta0 * np.sum(w / tr.h[:, None] ** 3 * np.sum(yD**2, axis=2))
        + params.eta1 * np.sum(w / tr.h[:, None] * np.sum(GD**2, axis=2))
    )


def assemble_load(space: DGSpace, f) -> np.ndarray:
    """``(f, w)`` for a constant 3-vector ``f`` or a callable of points (m, 2) -> (m, 3)."""
    n = space.mesh.n_cells
    rule = triangle_rule()
    phi = p2_values(rule.points)  # (q, 6)
    w = 2.0 * space.geometry.areas[:, None] * rule.weights[None, :]  # (n, q)
    if callable(f):
        xq = space.geometry.to_physical(np.repeat(np.arange(n), len(rule.weights)), np.tile(rule.points, (n, 1)))
        fq = np.asarray(f(xq), float).reshape(n, -1, 3)
    else:
        fq = np.broadcast_to(np.asarray(f, float), (n, len(rule.weights), 3))
    return np.einsum("nq,nqk,qi->nki", w, fq, phi).reshape(-1)


# ---------------------------------------------------------------------------
# mixed blocks


def cell_gradient_integrals(space: DGSpace) -> np.ndarray:
    """``int_T grad phi_i dx`` per cell, (n, 6, 2)."""
    n = space.mesh.n_cells
    rule = triangle_rule()
    gref = p2_gradients(rule.points)  # (q, 6, 2)
    g = np.einsum("qia,nab->nqib", gref, space.geometry.Binv)
    w = 2.0 * space.geometry.areas[:, None] * rule.weights[None, :]
    return np.einsum("nq,nqib->nib", w, g)


def assemble_coupling(space: DGSpace) -> sp.csr_matrix:
    """``(mu, grad w)``: rows are y dofs, columns mu dofs."""
    n = space.mesh.n_cells
    Ig = cell_gradient_integrals(space)  # (n, 6, 2)
    t = np.arange(n)[:, None, None, None]
    k = np.arange(3)[None, :, None, None]
    i = np.arange(6)[None, None, :, None]
    b = np.arange(2)[None, None, None, :]
    rows = np.broadcast_to(18 * t + 6 * k + i, (n, 3, 6, 2))
    cols = np.broadcast_to(6 * t + 2 * k + b, (n, 3, 6, 2))
    vals = np.broadcast_to(Ig[:, None, :, :], (n, 3, 6, 2))
    return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(18 * n, 6 * n))


def _as_field(G, n):
    G = np.asarray(G, float)
    if G.shape != (n, 3, 2):
        raise ValueError(f"expected a per-cell (n, 3, 2) field, got {G.shape}")
    return G


def validate_stiefel_field(G, tol=stiefel.STIEFEL_TOL) -> None:
    G = np.asarray(G, float)
    defect = np.abs(np.einsum("nki,nkj->nij", G, G) - np.eye(2)).max(axis=(1, 2))
    bad = np.flatnonzero(~(defect <= tol))
    if len(bad):
        raise stiefel.StiefelError(
            f"{len(bad)} cells off St(3,2); worst |G^T G - I| = {np.nanmax(defect):.3e} at cell {bad[0]}"
        )


def assemble_l_h_blocks(space: DGSpace, G) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Blocks of ``l_h(G; ., gamma)``.

    Returns ``(L1, L2)`` where ``L1`` (y rows x gamma columns) carries
    ``l_h(G; grad w(x_T), gamma)`` and ``L2`` (gamma rows x mu columns) carries
    ``l_h(G; mu, zeta)``.
    """
    n = space.mesh.n_cells
    G = _as_field(G, n)
    validate_stiefel_field(G)
    two_area = 2.0 * space.geometry.areas
    g = space.grads_at_barycenters()  # (n, 6, 2)

    # L1[(t,k,i), (t,m)]
    L1v = np.empty((n, 3, 6, 3))
    L1v[..., 0] = G[:, :, None, 0] * g[:, None, :, 0]
    L1v[..., 1] = G[:, :, None, 1] * g[:, None, :, 1]
    L1v[..., 2] = G[:, :, None, 0] * g[:, None, :, 1] + G[:, :, None, 1] * g[:, None, :, 0]
    L1v *= two_area[:, None, None, None]
    t = np.arange(n)[:, None, None, None]
    rows = np.broadcast_to(18 * t + 6 * np.arange(3)[None, :, None, None] + np.arange(6)[None, None, :, None], L1v.shape)
    cols = np.broadcast_to(3 * t + np.arange(3)[None, None, None, :], L1v.shape)
    L1 = sp.csr_matrix((L1v.ravel(), (rows.ravel(), cols.ravel())), shape=(18 * n, 3 * n))

    # L2[(t,m), (t,a,b)]
    L2v = np.zeros((n, 3, 3, 2))
    L2v[:, 0, :, 0] = G[:, :, 0]
    L2v[:, 1, :, 1] = G[:, :, 1]
    L2v[:, 2, :, 1] = G[:, :, 0]
    L2v[:, 2, :, 0] = G[:, :, 1]
    L2v *= two_area[:, None, None, None]
    rows = np.broadcast_to(3 * t + np.arange(3)[None, :, None, None], L2v.shape)
    cols = np.broadcast_to(6 * t + 2 * np.arange(3)[None, None, :, None] + np.arange(2)[None, None, None, :], L2v.shape)
    L2 = sp.csr_matrix((L2v.ravel(), (rows.ravel(), cols.ravel())), shape=(3 * n, 6 * n))
    return L1, L2


def l_h(space: DGSpace, G, mu, zeta) -> float:
    """Evaluate ``sum_T |T| zeta(x_T) : (G^T mu + mu^T G)(x_T)`` for cellwise fields."""
    mu = np.asarray(mu, float)
    zeta = np.asarray(zeta, float)
    brk = stiefel.batch_sym_bracket(np.asarray(G, float), mu)
    return float(np.sum(space.geometry.areas * np.einsum("nij,nij->n", zeta, brk)))


def exp_block_residual(space: DGSpace, G, mu: FEFunction, y: FEFunction, tau: float) -> np.ndarray:
    """``|T| (Exp_G(tau mu) - grad y)(x_T)`` per cell, flattened row-major."""
    n = space.mesh.n_cells
    G = _as_field(G, n)
    E = stiefel.batch_exp_map(G, mu.cellwise(), tau)
    r = E - space.grad_at_barycenters(y)
    return (space.geometry.areas[:, None, None] * r).reshape(-1)


def exp_block_jacobian(space: DGSpace, G, mu: FEFunction, tau: float) -> sp.csr_matrix:
    """Block-diagonal derivative of the exponential term with respect to mu."""
    n = space.mesh.n_cells
    G = _as_field(G, n)
    J = stiefel.batch_dexp_jacobian(G, mu.cellwise(), tau) * space.geometry.areas[:, None, None]
    return _block_diag(J)


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    n, m, _ = blocks.shape
    indptr = np.arange(0, n * m * m + 1, m)
    indices = (m * np.arange(n)[:, None, None] + np.arange(m)[None, None, :]).repeat(m, axis=1).ravel()
    return sp.csr_matrix((blocks.ravel(), indices, indptr), shape=(n * m, n * m))


# ---------------------------------------------------------------------------
# scalar diagnostics


def energy(space: DGSpace, y: FEFunction, f, params: PenaltyParams, data: BoundaryData) -> float:
    """Discrete energy ``1/2 a_h(y, y) - (f, y) - F_h(y)``."""
    A = assemble_a_h(space, params)
    c = y.coefficients
    return float(0.5 * c @ (A @ c) - assemble_load(space, f) @ c - assemble_F_h(space, params, data) @ c)


def isometry_defect(space: DGSpace, y: FEFunction) -> float:
    """Maximum over cells of ``|grad y^T grad y - I|_F`` at the barycenter."""
    g = space.grad_at_barycenters(y)
    d = np.einsum("nki,nkj->nij", g, g) - np.eye(2)
    return float(np.sqrt(np.einsum("nij,nij->n", d, d)).max())


def h2h_norm_matrix(space: DGSpace) -> sp.csr_matrix:
    K = scalar_bending_matrix(space, PenaltyParams(1.0, 1.0), consistency=False)
    return _expand_scalar_matrix(K, space.mesh.n_cells)


def h2h_norm(space: DGSpace, y: FEFunction) -> float:
    """Broken Hessian norm plus h^-1 gradient-jump and h^-3 value-jump terms on the skeleton."""
    c = y.coefficients
    return float(np.sqrt(max(c @ (h2h_norm_matrix(space) @ c), 0.0)))


def l2_norm_p0(space: DGSpace, field: FEFunction) -> float:
    """L2 norm of a cellwise constant M or S field (full symmetric expansion for S)."""
    vals = field.cellwise()
    return float(np.sqrt(np.sum(space.geometry.areas * (vals * vals).reshape(len(vals), -1).sum(axis=1))))


__all__ = [
    "PenaltyParams",
    "BoundaryData",
    "assemble_a_h",
    "assemble_F_h",
    "assemble_load",
    "assemble_coupling",
    "assemble_l_h_blocks",
    "exp_block_residual",
    "exp_block_jacobian",
    "energy",
    "boundary_data_offset",
    "isometry_defect",
    "h2h_norm",
    "l_h",
    "l2_norm_p0",
    "validate_stiefel_field",
]
