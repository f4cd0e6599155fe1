import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elastowave.mesh import OutOfDomainError, barycentric, locate_point, locate_points, uniform_triangulation


def scan_all(mesh, p, tol=1e-12):
    """Oracle: every triangle whose barycentric coordinates are all >= -tol."""
    lam = barycentric(mesh, np.arange(mesh.n_triangles), np.asarray(p)[None, :])
    return np.flatnonzero(np.all(lam >= -tol, axis=1))


@pytest.mark.parametrize("n, nodes, tris, bnd", [(1, 4, 2, 4), (2, 9, 8, 8), (4, 25, 32, 16)])
def test_counts(n, nodes, tris, bnd):
    m = uniform_triangulation(n)
    assert m.n_nodes == nodes
    assert m.n_triangles == tris
    assert len(m.boundary_nodes) == bnd


def test_h():
    assert uniform_triangulation(4).h == 0.25


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_invalid_n(bad):
    with pytest.raises(ValueError):
        uniform_triangulation(bad)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16])
def test_areas_and_orientation(n):
    m = uniform_triangulation(n)
    np.testing.assert_allclose(m.signed_areas, 0.5 / n ** 2, rtol=1e-13)
    assert abs(m.signed_areas.sum() - 1.0) < 1e-14


@pytest.mark.parametrize("n", [1, 3, 8])
def test_boundary_nodes_exact(n):
    m = uniform_triangulation(n)
    x = m.nodes
    expected = np.flatnonzero((x[:, 0] == 0) | (x[:, 0] == 1) | (x[:, 1] == 0) | (x[:, 1] == 1))
    np.testing.assert_array_equal(np.sort(m.boundary_nodes), expected)


def test_diagonal_direction():
    m = uniform_triangulation(1)
    # both triangles share the (0,0)-(1,1) diagonal
    for tri in m.triangles:
        pts = {tuple(m.nodes[i]) for i in tri}
        assert {(0.0, 0.0), (1.0, 1.0)} <= pts


@pytest.mark.parametrize("n", [1, 2, 5])
def test_nesting(n):
    coarse, fine = uniform_triangulation(n), uniform_triangulation(2 * n)
    fine_set = {tuple(p) for p in fine.nodes}
    assert all(tuple(p) in fine_set for p in coarse.nodes)
    edges = {tuple(sorted((a, b))) for t in coarse.triangles for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    # compare on the fine integer lattice to avoid round-off in midpoints
    key = lambda p: tuple(np.rint(np.asarray(p) * 2 * n).astype(int))
    mids = {key((coarse.nodes[a] + coarse.nodes[b]) / 2) for a, b in edges}
    coarse_keys = {key(p) for p in coarse.nodes}
    for p in fine.nodes:
        assert np.allclose(p * 2 * n, np.rint(p * 2 * n), atol=1e-9)
        assert key(p) in coarse_keys or key(p) in mids


def test_locate_vertex():
    m = uniform_triangulation(1)
    tri, lam = locate_point(m, (0.0, 0.0))
    local = list(m.triangles[tri]).index(0)
    assert lam[local] == pytest.approx(1.0, abs=1e-12)


def test_locate_centroid():
    m = uniform_triangulation(1)
    c = m.nodes[m.triangles[0]].mean(axis=0)
    tri, lam = locate_point(m, c)
    assert tri == 0
    np.testing.assert_allclose(lam, [1 / 3] * 3, atol=1e-12)


def test_locate_matches_exhaustive_scan():
    m = uniform_triangulation(2)
    p = np.array([0.3, 0.7])
    tri, lam = locate_point(m, p)
    hits = scan_all(m, p)
    assert list(hits) == [tri]
    np.testing.assert_allclose(lam @ m.nodes[m.triangles[tri]], p, atol=1e-12)


def test_shared_edge_takes_lowest_index():
    m = uniform_triangulation(4)
    for p in [(0.25, 0.1), (0.5, 0.5), (0.3, 0.3), (0.25, 0.75), (1.0, 1.0), (0.6, 0.0)]:
        tri, _ = locate_point(m, p)
        assert tri == scan_all(m, p).min()


def test_out_of_domain():
    m = uniform_triangulation(2)
    with pytest.raises(OutOfDomainError):
        locate_point(m, (1.1, 0.5))
    with pytest.raises(OutOfDomainError):
        locate_point(m, (0.5, -0.01))


coord = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 9), coord, coord)
def test_locate_property(n, x, y):
    m = uniform_triangulation(n)
    p = np.array([x, y])
    tri, lam = locate_point(m, p)
    assert np.all(lam >= 0)
    assert abs(lam.sum() - 1) <= 1e-12
    np.testing.assert_allclose(lam @ m.nodes[m.triangles[tri]], p, atol=1e-12)
    assert tri == scan_all(m, p).min()


def test_vectorised_matches_scalar(rng):
    m = uniform_triangulation(6)
    pts = rng.uniform(size=(50, 2))
    tris, lams = locate_points(m, pts)
    for p, t, lam in zip(pts, tris, lams):
        t1, lam1 = locate_point(m, p)
        assert t == t1
        np.testing.assert_array_equal(lam, lam1)
