"""Structured triangulations of rectangles, edge classification and quadrature."""

from __future__ import annotations

import dataclasses
import warnings
from typing import Callable

import numpy as np

INTERIOR, DIRICHLET, FREE = 0, 1, 2
EDGE_KINDS = {INTERIOR: "interior", DIRICHLET: "dirichlet", FREE: "free"}


@dataclasses.dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # reference coordinates
    weights: np.ndarray  # sum to the reference measure
    degree: int


def triangle_rule() -> QuadratureRule:
    """Six-point degree-4 rule on the reference triangle (0,0), (1,0), (0,1)."""
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = np.array(
        [[a, a], [1 - 2 * a, a], [a, 1 - 2 * a], [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]]
    )
    w = 0.5 * np.array([wa, wa, wa, wb, wb, wb])
    return QuadratureRule(pts, w, 4)


def segment_rule() -> QuadratureRule:
    """Three-point Gauss-Legendre on [0, 1], exact to degree 5."""
    x, w = np.polynomial.legendre.leggauss(3)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 5)


@dataclasses.dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with classified edges.

    Edge arrays are aligned: ``edges[e]`` is a vertex pair, ``edge_cells[e]``
    holds the (minus, plus) cells with ``-1`` for a missing plus side,
    ``normals[e]`` points from the minus cell to the plus cell (outward on the
    boundary) and ``kinds[e]`` is one of INTERIOR / DIRICHLET / FREE.
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_cells: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    kinds: np.ndarray
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def corners(self) -> np.ndarray:
        """Cell vertex coordinates, shape (n_cells, 3, 2)."""
        return self.vertices[self.cells]

    @property
    def areas(self) -> np.ndarray:
        c = self.corners
        e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def barycenters(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @property
    def diameters(self) -> np.ndarray:
        c = self.corners
        d = np.linalg.norm(c[:, [1, 2, 0]] - c, axis=2)
        return d.max(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    @property
    def h_min(self) -> float:
        return float(self.diameters.min())

    @property
    def midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    def skeleton(self) -> np.ndarray:
        """Indices of edges in the skeleton (interior plus Dirichlet)."""
        return np.flatnonzero(self.kinds != FREE)

    def edges_of_kind(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kinds == kind)

    def shape_ratios(self) -> np.ndarray:
        """Circumradius over inradius per cell (2 for an equilateral triangle)."""
        c = self.corners
        a, b, cc = (np.linalg.norm(c[:, i] - c[:, j], axis=1) for i, j in ((1, 2), (2, 0), (0, 1)))
        area = self.areas
        R = a * b * cc / (4 * area)
        r = 2 * area / (a + b + cc)
        return R / r

    def barycenter(self, cell: int) -> np.ndarray:
        return self.vertices[self.cells[cell]].mean(axis=0)

    def dump(self, path) -> None:
        """Write a plain-text vertex / cell listing."""
        with open(path, "w") as fh:
            fh.write(f"vertices {len(self.vertices)}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            fh.write(f"cells {len(self.cells)}\n")
            for tri in self.cells:
                fh.write(f"{tri[0]} {tri[1]} {tri[2]}\n")


def _build_edges(vertices, cells):
    local = np.array([[0, 1], [1, 2], [2, 0]])
    pairs = cells[:, local].reshape(-1, 2)
    owner = np.repeat(np.arange(len(cells)), 3)
    key = np.sort(pairs, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if counts.max() > 2:
        raise ValueError("non-manifold triangulation: an edge is shared by more than two cells")
    edge_cells = np.full((len(uniq), 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    first = np.ones(len(order), bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    edge_cells[inverse[order][first], 0] = owner[order][first]
    edge_cells[inverse[order][~first], 1] = owner[order][~first]

    p0, p1 = vertices[uniq[:, 0]], vertices[uniq[:, 1]]
    t = p1 - p0
    lengths = np.linalg.norm(t, axis=1)
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / lengths[:, None]
    # orient from the minus cell outward
    c0 = vertices[cells[edge_cells[:, 0]]].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, 0.5 * (p0 + p1) - c0) < 0
    normals[flip] *= -1
    kinds = np.where(edge_cells[:, 1] >= 0, INTERIOR, FREE)
    return uniq.astype(np.int64), edge_cells, normals, lengths, kinds


def build_structured(nx: int, ny: int, bounds=((0.0, 1.0), (0.0, 1.0)), split: str = "crisscross") -> TriMesh:
    """Triangulate a rectangle on an ``nx`` by ``ny`` grid of quads.

    ``crisscross`` cuts every quad into four triangles about its center
    (4 nx ny cells); ``two_triangle`` cuts along the lower-left to upper-right
    diagonal (2 nx ny cells). All boundary edges start out free.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bounds {bounds}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a, b, c, d = vid(I, J), vid(I + 1, J), vid(I + 1, J + 1), vid(I, J + 1)
    if split == "crisscross":
        centers = np.stack([0.5 * (xs[I] + xs[I + 1]), 0.5 * (ys[J] + ys[J + 1])], axis=1)
        m = len(verts) + np.arange(len(I))
        verts = np.vstack([verts, centers])
        cells = np.stack(
            [np.stack(t, axis=1) for t in ((a, b, m), (b, c, m), (c, d, m), (d, a, m))], axis=1
        ).reshape(-1, 3)
    elif split == "two_triangle":
        cells = np.stack([np.stack((a, b, c), axis=1), np.stack((a, c, d), axis=1)], axis=1).reshape(-1, 3)
    else:
        raise ValueError(f"unknown split {split!r}")
    edges, edge_cells, normals, lengths, kinds = _build_edges(verts, cells)
    return TriMesh(
        vertices=verts,
        cells=cells.astype(np.int64),
        edges=edges,
        edge_cells=edge_cells,
        normals=normals,
        lengths=lengths,
        kinds=kinds,
        bounds=((float(x0), float(x1)), (float(y0), float(y1))),
    )


def from_arrays(vertices, cells) -> TriMesh:
    """Mesh from raw vertex and cell arrays; cells are reordered to be counterclockwise."""
    verts = np.asarray(vertices, dtype=float)
    cells = np.array(cells, dtype=np.int64)
    c = verts[cells]
    e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
    cw = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    cells[cw] = cells[cw][:, [0, 2, 1]]
    edges, edge_cells, normals, lengths, kinds = _build_edges(verts, cells)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    return TriMesh(verts, cells, edges, edge_cells, normals, lengths, kinds,
                   ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))))


def classify_edges(mesh: TriMesh, dirichlet: Callable[[np.ndarray], np.ndarray] | None) -> TriMesh:
    """Mark boundary edges whose midpoint satisfies ``dirichlet`` as Dirichlet.

    ``dirichlet`` takes an ``(m, 2)`` array of midpoints and returns a boolean
    mask. ``None`` leaves every boundary edge free.
    """
    kinds = np.where(mesh.edge_cells[:, 1] >= 0, INTERIOR, FREE)
    boundary = np.flatnonzero(kinds == FREE)
    if dirichlet is not None and len(boundary):
        hit = np.asarray(dirichlet(mesh.midpoints[boundary]), dtype=bool)
        kinds[boundary[hit]] = DIRICHLET
    if not np.any(kinds == DIRICHLET):
        warnings.warn("no Dirichlet edges selected; the bending form has a kernel", stacklevel=2)
    return dataclasses.replace(mesh, kinds=kinds)


def side_predicate(bounds, sides, atol=1e-12):
    """Predicate for a union of rectangle sides: any of 'left', 'right', 'bottom', 'top'."""
    (x0, x1), (y0, y1) = bounds
    tests = {
        "left": lambda p: np.abs(p[:, 0] - x0) < atol,
        "right": lambda p: np.abs(p[:, 0] - x1) < atol,
        "bottom": lambda p: np.abs(p[:, 1] - y0) < atol,
        "top": lambda p: np.abs(p[:, 1] - y1) < atol,
    }
    unknown = set(sides) - set(tests)
    if unknown:
        raise ValueError(f"unknown sides {sorted(unknown)}")

    def pred(p):
        mask = np.zeros(len(p), bool)
        for s in sides:
            mask |= tests[s](p)
        return mask

    return pred


def barycenter(mesh: TriMesh, cell: int) -> np.ndarray:
    return mesh.barycenter(cell)
