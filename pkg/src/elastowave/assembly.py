"""P1 vector finite element assembly on :class:`~elastowave.mesh.Mesh`.

Degrees of freedom are interleaved: component ``c`` of node ``i`` is dof
``2*i + c``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import SparseMatrix, TripletBuilder, spmv
from .mesh import Mesh

# edge-midpoint rule: exact for quadratics, weights area/3 each
QUAD_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
QUAD_WEIGHTS = np.full(3, 1.0 / 3.0)

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True, eq=False)
class DofMap:
    n_nodes: int
    constrained: np.ndarray = field(repr=False)

    @property
    def ndofs(self) -> int:
        return 2 * self.n_nodes

    def dof(self, node, component):
        return 2 * np.asarray(node) + np.asarray(component)

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.ndofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)

    def constrained_mask(self) -> np.ndarray:
        mask = np.zeros(self.ndofs, dtype=bool)
        mask[self.constrained] = True
        return mask


def make_dofmap(mesh: Mesh) -> DofMap:
    b = np.asarray(mesh.boundary_nodes)
    constrained = np.sort(np.concatenate([2 * b, 2 * b + 1]))
    return DofMap(mesh.n_nodes, constrained)


def element_dofs(mesh: Mesh) -> np.ndarray:
    """Local-to-global dof table, shape (T, 6), ordered (a, c) -> 2a + c."""
    t = mesh.triangles
    return np.stack([2 * t[:, a] + c for a in range(3) for c in range(2)], axis=1)


def _scatter(mesh: Mesh, local: np.ndarray, ndofs: int) -> SparseMatrix:
    dofs = element_dofs(mesh)
    b = TripletBuilder()
    b.add(np.repeat(dofs, 6, axis=1), np.tile(dofs, (1, 6)), local.reshape(len(dofs), 36))
    return b.finalize(ndofs, ndofs)


def element_mass(area: float) -> np.ndarray:
    """Scalar P1 mass matrix of one triangle."""
    return area * _MASS_REF


def assemble_mass(mesh: Mesh, dofmap: DofMap) -> SparseMatrix:
    local = np.zeros((mesh.n_triangles, 3, 2, 3, 2))
    for c in range(2):
        local[:, :, c, :, c] = element_mass(mesh.signed_areas[:, None, None])
    return _scatter(mesh, local, dofmap.ndofs)


def assemble_elastic_stiffness(mesh: Mesh, dofmap: DofMap, lam: float, mu: float) -> SparseMatrix:
    """Matrix of ``lam (div u, div w) + mu (eps(u), eps(w))``.

    Note the plain ``mu`` (not ``2 mu``) in front of the strain product.
    """
    if lam < 0 or mu <= 0:
        raise ValueError(f"need lam >= 0 and mu > 0, got lam={lam}, mu={mu}")
    g = mesh.basis_gradients
    area = mesh.signed_areas[:, None, None, None, None]
    gg = np.einsum("tai,tbi->tab", g, g)
    # local[t, a, c, b, d]
    div = np.einsum("tac,tbd->tacbd", g, g)
    cross = np.einsum("tad,tbc->tacbd", g, g)
    eye = np.eye(2)
    sym = 0.5 * (gg[:, :, None, :, None] * eye[None, None, :, None, :] + cross)
    local = area * (lam * div + mu * sym)
    return _scatter(mesh, local, dofmap.ndofs)


def assemble_gradient_stiffness(mesh: Mesh, dofmap: DofMap) -> SparseMatrix:
    """Matrix of ``(grad u, grad w)``; components are uncoupled."""
    g = mesh.basis_gradients
    gg = mesh.signed_areas[:, None, None] * np.einsum("tai,tbi->tab", g, g)
    local = np.zeros((mesh.n_triangles, 3, 2, 3, 2))
    for c in range(2):
        local[:, :, c, :, c] = gg
    return _scatter(mesh, local, dofmap.ndofs)


def quadrature_points(mesh: Mesh) -> np.ndarray:
    """Physical edge-midpoint quadrature points, shape (T, 3, 2)."""
    return _quadrature(mesh).points


@dataclass(frozen=True, eq=False)
class _Quadrature:
    points: np.ndarray
    interp: SparseMatrix  # dofs -> values at (t, q, c)
    test: SparseMatrix  # weighted transpose of ``interp``


_QUAD_CACHE: "weakref.WeakKeyDictionary[Mesh, _Quadrature]" = weakref.WeakKeyDictionary()


def _quadrature(mesh: Mesh) -> _Quadrature:
    cached = _QUAD_CACHE.get(mesh)
    if cached is not None:
        return cached
    T = mesh.n_triangles
    points = np.einsum("qa,tai->tqi", QUAD_BARY, mesh.nodes[mesh.triangles])
    rows = np.arange(T * 6).reshape(T, 3, 2)
    rows = np.broadcast_to(rows[:, :, :, None], (T, 3, 2, 3))
    cols = 2 * mesh.triangles[:, None, None, :] + np.arange(2)[None, None, :, None]
    cols = np.broadcast_to(cols, (T, 3, 2, 3))
    vals = np.broadcast_to(QUAD_BARY[None, :, None, :], (T, 3, 2, 3))
    w = (mesh.signed_areas[:, None] * QUAD_WEIGHTS[None, :])[:, :, None, None]
    ndofs = 2 * mesh.n_nodes
    b = TripletBuilder()
    b.add(rows, cols, vals)
    interp = b.finalize(T * 6, ndofs)
    b = TripletBuilder()
    b.add(cols, rows, vals * w)
    test = b.finalize(ndofs, T * 6)
    q = _Quadrature(points, interp, test)
    _QUAD_CACHE[mesh] = q
    return q


def interpolate_at_quadrature(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Values of the P1 field ``u`` at the quadrature points, shape (T, 3, 2)."""
    return spmv(_quadrature(mesh).interp, u).reshape(mesh.n_triangles, 3, 2)


def integrate_against_basis(mesh: Mesh, values: np.ndarray, ndofs: int) -> np.ndarray:
    """Return ``b[2a+c] = sum_q w_q area values[t, q, c] phi_a(x_q)`` assembled."""
    if ndofs != 2 * mesh.n_nodes:
        raise ValueError("ndofs does not match the mesh")
    vals = np.ascontiguousarray(np.broadcast_to(values, (mesh.n_triangles, 3, 2)), dtype=float)
    return spmv(_quadrature(mesh).test, vals.reshape(-1))


FieldFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def assemble_load(mesh: Mesh, dofmap: DofMap, f: FieldFunction, u) -> np.ndarray:
    """Load vector of ``f(x, u_h(x))`` tested against every hat function.

    ``f`` is called once with arrays ``x`` and ``u`` of shape (T, 3, 2) and
    must return the same shape.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (dofmap.ndofs,):
        raise ValueError(f"u has shape {u.shape}, expected ({dofmap.ndofs},)")
    vals = f(quadrature_points(mesh), interpolate_at_quadrature(mesh, u))
    return integrate_against_basis(mesh, np.asarray(vals, dtype=float), dofmap.ndofs)


def apply_dirichlet(a: SparseMatrix, b, constrained) -> tuple[SparseMatrix, np.ndarray]:
    """Symmetric elimination of homogeneous Dirichlet dofs.

    Constrained rows and columns are zeroed, their diagonal set to one and
    the matching right-hand side entries set to zero.
    """
    constrained = np.asarray(constrained, dtype=np.int64)
    b = np.array(b, dtype=float, copy=True)
    if constrained.size == 0:
        return a, b
    mask = np.zeros(a.nrows, dtype=bool)
    mask[constrained] = True
    rows = a.row_ids
    keep = ~(mask[rows] | mask[a.col_indices])
    tb = TripletBuilder()
    tb.add(rows[keep], a.col_indices[keep], a.values[keep])
    tb.add(constrained, constrained, np.ones(constrained.size))
    b[constrained] = 0.0
    return tb.finalize(a.nrows, a.ncols), b


@dataclass(frozen=True, eq=False)
class BilinearForms:
    """Assembled (unconstrained) mass, elastic and gradient matrices."""

    mesh: Mesh
    dofmap: DofMap
    M: SparseMatrix
    A: SparseMatrix
    K: SparseMatrix
    lam: float
    mu: float


def assemble_forms(mesh: Mesh, lam: float, mu: float) -> BilinearForms:
    dm = make_dofmap(mesh)
    return BilinearForms(
        mesh=mesh, dofmap=dm,
        M=assemble_mass(mesh, dm),
        A=assemble_elastic_stiffness(mesh, dm, lam, mu),
        K=assemble_gradient_stiffness(mesh, dm),
        lam=lam, mu=mu,
    )
