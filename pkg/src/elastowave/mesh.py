"""Structured triangulations of the unit square and point location."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

#: Containment tolerance for barycentric coordinates.
CONTAIN_TOL = 1e-12


class OutOfDomainError(ValueError):
    """Raised when a point lies outside the closed unit square."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform triangulation of [0, 1]^2 with ``n`` cells per side.

    Node ``i + j*(n+1)`` sits at ``(i/n, j/n)``. Cell ``(i, j)`` owns
    triangles ``2*(i + j*n)`` (below the diagonal) and ``2*(i + j*n) + 1``
    (above it); the diagonal always runs lower-left to upper-right.
    """

    n: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the three hat functions, shape (T, 3, 2)."""
        p = self.nodes[self.triangles]
        two_area = 2.0 * self.signed_areas
        # grad(lambda_a) = rot90(opposite edge) / (2 * area)
        x, y = p[..., 0], p[..., 1]
        g = np.empty((self.n_triangles, 3, 2))
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            g[:, a, 0] = (y[:, b] - y[:, c]) / two_area
            g[:, a, 1] = (x[:, c] - x[:, b]) / two_area
        return g

    def cell_triangles(self, i: int, j: int) -> tuple[int, int]:
        c = i + j * self.n
        return 2 * c, 2 * c + 1


def uniform_triangulation(n: int) -> Mesh:
    """Build the structured mesh with ``n`` subdivisions per side."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n!r}")
    n = int(n)
    ticks = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ticks, ticks, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    v00 = ii + jj * (n + 1)
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])

    on_edge = (
        np.isin(nodes[:, 0], (0.0, 1.0)) | np.isin(nodes[:, 1], (0.0, 1.0))
    )
    boundary = np.flatnonzero(on_edge)
    for arr in (nodes, tris, boundary):
        arr.setflags(write=False)
    return Mesh(n=n, nodes=nodes, triangles=tris, boundary_nodes=boundary)


def barycentric(mesh: Mesh, tri: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``points`` w.r.t. triangles ``tri``."""
    p = mesh.nodes[mesh.triangles[tri]]
    d = points - p[..., 0, :]
    e1 = p[..., 1, :] - p[..., 0, :]
    e2 = p[..., 2, :] - p[..., 0, :]
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    l1 = (d[..., 0] * e2[..., 1] - d[..., 1] * e2[..., 0]) / det
    l2 = (e1[..., 0] * d[..., 1] - e1[..., 1] * d[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate_points(mesh: Mesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`locate_point`.

    Only the (up to) eight triangles of the cells around the point's grid
    cell are examined; the lowest-index containing triangle wins, which is
    the same answer a scan over all triangles gives.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    bad = np.any((pts < -CONTAIN_TOL) | (pts > 1.0 + CONTAIN_TOL), axis=1)
    if np.any(bad):
        raise OutOfDomainError(f"point {pts[bad][0]} lies outside [0,1]^2")
    n = mesh.n
    ci = np.clip(np.floor(pts * n).astype(np.int64), 0, n - 1)

    offs = np.array([(-1, -1), (0, -1), (-1, 0), (0, 0)])
    cand = []
    for di, dj in offs:
        i = np.clip(ci[:, 0] + di, 0, n - 1)
        j = np.clip(ci[:, 1] + dj, 0, n - 1)
        c = i + j * n
        cand.extend([2 * c, 2 * c + 1])
    cand = np.stack(cand, axis=1)
    cand.sort(axis=1)

    lam = barycentric(mesh, cand, pts[:, None, :])
    inside = np.all(lam >= -CONTAIN_TOL, axis=-1)
    first = np.argmax(inside, axis=1)
    if not np.all(inside[np.arange(len(pts)), first]):
        raise RuntimeError("point location failed inside the unit square")
    rows = np.arange(len(pts))
    tri = cand[rows, first]
    coords = lam[rows, first]
    # snap round-off so the coordinates are a convex combination
    coords = np.clip(coords, 0.0, None)
    coords /= coords.sum(axis=1, keepdims=True)
    return tri, coords


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Return ``(triangle index, barycentric coordinates)`` for point ``p``."""
    tri, coords = locate_points(mesh, np.asarray(p, dtype=float)[None, :])
    return int(tri[0]), coords[0]
