import numpy as np
import pytest
from hypothesis import given, strategies as st

from isoplate import mesh as ms


@pytest.mark.parametrize("n,cells", [(10, 400), (20, 1600), (40, 6400), (60, 14400)])
def test_crisscross_counts(n, cells):
    m = ms.build_structured(n, n, ((0, 4), (0, 4)))
    assert m.n_cells == cells


def test_two_triangle_single_quad():
    m = ms.build_structured(1, 1, split="two_triangle")
    assert m.n_cells == 2
    assert len(m.edges_of_kind(ms.INTERIOR)) == 1


@given(st.integers(1, 7), st.integers(1, 7), st.sampled_from(["crisscross", "two_triangle"]))
def test_structured_invariants(nx, ny, split):
    b = ((-1.0, 2.5), (0.5, 1.5))
    m = ms.build_structured(nx, ny, b, split)
    assert np.all(m.areas > 0)
    assert abs(m.areas.sum() - 3.5) <= 1e-12 * 3.5
    interior = m.edge_cells[:, 1] >= 0
    # every interior edge has two distinct cells, boundary edges one
    assert np.all(m.edge_cells[interior, 0] != m.edge_cells[interior, 1])
    # each cell has exactly three edges
    counts = np.bincount(m.edge_cells[m.edge_cells >= 0].ravel(), minlength=m.n_cells)
    assert np.all(counts == 3)
    # normal points from the minus cell towards the plus cell
    bc = m.barycenters
    d = bc[m.edge_cells[interior, 1]] - bc[m.edge_cells[interior, 0]]
    assert np.all(np.einsum("ij,ij->i", d, m.normals[interior]) > 0)
    # boundary normals point outward
    mid = m.midpoints[~interior]
    out = mid - bc[m.edge_cells[~interior, 0]]
    assert np.all(np.einsum("ij,ij->i", out, m.normals[~interior]) > 0)
    np.testing.assert_allclose(np.linalg.norm(m.normals, axis=1), 1.0)
    r = m.shape_ratios()
    assert np.all(np.isfinite(r)) and np.all(r >= 2 - 1e-12)


def test_shape_ratio_of_benchmark_mesh():
    # right isosceles triangles throughout: R/r = 1 + sqrt(2)
    m = ms.build_structured(10, 10, ((0, 4), (0, 4)))
    np.testing.assert_allclose(m.shape_ratios(), 1 + np.sqrt(2))


def test_dirichlet_classification():
    b = ((0.0, 4.0), (0.0, 4.0))
    m = ms.classify_edges(ms.build_structured(10, 10, b), ms.side_predicate(b, ["left", "bottom"]))
    assert len(m.edges_of_kind(ms.DIRICHLET)) == 20
    assert len(m.edges_of_kind(ms.FREE)) == 20
    assert set(m.skeleton()) == set(np.flatnonzero(m.kinds != ms.FREE))

    b = ((-2.0, 2.0), (0.0, 1.0))
    m = ms.classify_edges(ms.build_structured(8, 2, b), ms.side_predicate(b, ["left", "right"]))
    mids = m.midpoints[m.edges_of_kind(ms.DIRICHLET)]
    assert len(mids) == 4 and np.all(np.abs(np.abs(mids[:, 0]) - 2) < 1e-12)


def test_empty_predicate_warns():
    with pytest.warns(UserWarning):
        m = ms.classify_edges(ms.build_structured(2, 2), None)
    assert not np.any(m.kinds == ms.DIRICHLET)


def test_unknown_inputs():
    with pytest.raises(ValueError):
        ms.build_structured(0, 2)
    with pytest.raises(ValueError):
        ms.build_structured(2, 2, split="zigzag")
    with pytest.raises(ValueError):
        ms.side_predicate(((0, 1), (0, 1)), ["north"])


def test_barycenter():
    m = ms.build_structured(1, 1, split="two_triangle")
    c = m.cells[0]
    np.testing.assert_allclose(ms.barycenter(m, 0), m.vertices[c].mean(axis=0))
    tri = ms.TriMesh(np.array([[0, 0], [1, 0], [0, 1.0]]) + 3.0, np.array([[0, 1, 2]]), *[None] * 5)
    np.testing.assert_allclose(tri.barycenter(0), [3 + 1 / 3, 3 + 1 / 3])


def test_quadrature_exactness():
    rule = ms.triangle_rule()
    assert np.all(rule.weights > 0) and abs(rule.weights.sum() - 0.5) < 1e-15
    x, y = rule.points.T
    from math import factorial

    for a in range(5):
        for b in range(5 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert abs(rule.weights @ (x**a * y**b) - exact) < 1e-13
    np.testing.assert_allclose(rule.weights @ rule.points / rule.weights.sum(), [1 / 3, 1 / 3], atol=1e-15)
    seg = ms.segment_rule()
    for k in range(6):
        assert abs(seg.weights @ seg.points**k - 1 / (k + 1)) < 1e-14


def test_dump(tmp_path):
    m = ms.build_structured(1, 1, split="two_triangle")
    m.dump(tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_text().splitlines()[0] == "vertices 4"
