import numpy as np
import pytest
import sympy as sp

from elastowave.assembly import (
    apply_dirichlet, assemble_elastic_stiffness, assemble_forms, assemble_load,
    element_mass, make_dofmap,
)
from elastowave.linalg import SparseMatrix, cg_solve
from elastowave.mesh import uniform_triangulation

from oracles import dense_mass, dense_oracle, nodal


def test_element_mass_symbolic():
    x, y = sp.symbols("x y")
    hats = [1 - x - y, x, y]  # reference right triangle, area 1/2
    exact = sp.Matrix(3, 3, lambda i, j: sp.integrate(sp.integrate(hats[i] * hats[j], (y, 0, 1 - x)), (x, 0, 1)))
    np.testing.assert_allclose(element_mass(0.5), np.array(exact, dtype=float), rtol=1e-15)
    np.testing.assert_allclose(element_mass(0.5) * 24, [[2, 1, 1], [1, 2, 1], [1, 1, 2]])


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_mass_partition_of_unity(n, forms_factory):
    M = forms_factory(n).M
    assert abs(M.values.sum() - 2.0) < 1e-12
    w = nodal(forms_factory(n).mesh, lambda x, y: (1.0, 1.0))
    assert w @ M.to_dense() @ w == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_symmetry_and_definiteness(n, forms_factory, rng):
    f = forms_factory(n, 0.7, 1.3)
    for mat in (f.M, f.A, f.K):
        assert mat.is_symmetric(tol=1e-14)
    ev_M = np.linalg.eigvalsh(f.M.to_dense())
    assert ev_M.min() > 0
    for mat in (f.A, f.K):
        ev = np.linalg.eigvalsh(mat.to_dense())
        assert ev.min() > -1e-12 * ev.max()


@pytest.mark.parametrize("n", [2, 4, 8])
def test_rigid_modes_in_kernel(n, forms_factory):
    f = forms_factory(n, 2.0, 0.5)
    scale = f.A.max_abs()
    for fun in (lambda x, y: (1.0, 0.0), lambda x, y: (0.0, 1.0), lambda x, y: (-y, x)):
        w = nodal(f.mesh, fun)
        assert np.abs(f.A @ w).max() <= 1e-12 * scale


@pytest.mark.parametrize("lam, mu", [(1.0, 1.0), (2.5, 0.4), (0.0, 1.0)])
def test_elastic_quadratic_form_linear_field(lam, mu):
    m = uniform_triangulation(4)
    A = assemble_elastic_stiffness(m, make_dofmap(m), lam, mu)
    w = nodal(m, lambda x, y: (x, 0.0 * y))
    assert w @ (A @ w) == pytest.approx(lam + mu, rel=1e-13)


def test_elastic_rejects_bad_coefficients():
    m = uniform_triangulation(2)
    with pytest.raises(ValueError):
        assemble_elastic_stiffness(m, make_dofmap(m), -1.0, 1.0)
    with pytest.raises(ValueError):
        assemble_elastic_stiffness(m, make_dofmap(m), 1.0, 0.0)


def test_gradient_matrix_values(forms_factory):
    f = forms_factory(4)
    K = f.K.to_dense()
    assert nodal(f.mesh, lambda x, y: (1.0, 1.0)) @ K @ nodal(f.mesh, lambda x, y: (1.0, 1.0)) == pytest.approx(0, abs=1e-12)
    w = nodal(f.mesh, lambda x, y: (x, 0 * y))
    assert w @ K @ w == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_against_dense_oracle(n):
    m = uniform_triangulation(n)
    f = assemble_forms(m, 1.7, 0.6)
    A_or, K_or = dense_oracle(m, 1.7, 0.6)
    np.testing.assert_allclose(f.A.to_dense(), A_or, atol=1e-13)
    np.testing.assert_allclose(f.K.to_dense(), K_or, atol=1e-13)
    # K is the scalar Laplacian duplicated per component
    np.testing.assert_array_equal(f.K.to_dense()[0::2, 1::2], 0)
    np.testing.assert_allclose(f.K.to_dense()[0::2, 0::2], f.K.to_dense()[1::2, 1::2])


def test_spmv_matches_dense_for_assembled(forms_factory, rng):
    for n in (1, 2, 3, 4):
        f = forms_factory(n)
        x = rng.normal(size=f.dofmap.ndofs)
        for mat in (f.M, f.A, f.K):
            np.testing.assert_allclose(mat @ x, mat.to_dense() @ x, rtol=1e-13, atol=1e-13)


def test_dofmap():
    m = uniform_triangulation(3)
    dm = make_dofmap(m)
    assert dm.ndofs == 32
    assert dm.dof(5, 1) == 11
    expected = sorted([2 * i + c for i in m.boundary_nodes for c in (0, 1)])
    assert list(dm.constrained) == expected
    assert len(dm.free) == 2 * 4


def test_load_zero(forms_factory, rng):
    f = forms_factory(4)
    b = assemble_load(f.mesh, f.dofmap, lambda x, u: np.zeros_like(u), rng.normal(size=f.dofmap.ndofs))
    np.testing.assert_array_equal(b, 0)


def test_load_constant(forms_factory):
    f = forms_factory(4)
    b = assemble_load(f.mesh, f.dofmap, lambda x, u: np.stack([np.ones(u.shape[:-1]), np.zeros(u.shape[:-1])], -1),
                      np.zeros(f.dofmap.ndofs))
    expected = f.M @ nodal(f.mesh, lambda x, y: (1.0, 0.0))
    np.testing.assert_allclose(b, expected, atol=1e-15)
    np.testing.assert_array_equal(b[1::2], 0)
    assert b.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [2, 5])
def test_load_identity_reproduces_mass_product(n, forms_factory, rng):
    f = forms_factory(n)
    u = rng.normal(size=f.dofmap.ndofs)
    b = assemble_load(f.mesh, f.dofmap, lambda x, uq: uq, u)
    np.testing.assert_allclose(b, f.M @ u, atol=1e-14)


def test_load_quadratic_exact(forms_factory):
    # midpoint rule is exact for quadratics: f = x1 (times linear hats)
    f = forms_factory(3)
    b = assemble_load(f.mesh, f.dofmap, lambda x, u: np.stack([x[..., 0], 0 * x[..., 0]], -1),
                      np.zeros(f.dofmap.ndofs))
    np.testing.assert_allclose(b, f.M @ nodal(f.mesh, lambda x, y: (x, 0 * y)), atol=1e-15)


def test_dirichlet_noop(rng):
    a = SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]])
    a2, b2 = apply_dirichlet(a, [1.0, 2.0], [])
    np.testing.assert_array_equal(a2.to_dense(), a.to_dense())
    np.testing.assert_array_equal(b2, [1.0, 2.0])


def test_dirichlet_all():
    a = SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]])
    a2, b2 = apply_dirichlet(a, [1.0, 2.0], [0, 1])
    np.testing.assert_array_equal(a2.to_dense(), np.eye(2))
    np.testing.assert_array_equal(b2, 0)


def test_dirichlet_chain_hand_reduction():
    a = SparseMatrix.from_dense([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    a2, b2 = apply_dirichlet(a, [5.0, 3.0, 7.0], [0, 2])
    assert a2.is_symmetric()
    x = cg_solve(a2, b2, rel_tol=1e-14).x
    # reduced 1x1 system: 2 x = 3
    np.testing.assert_allclose(x, [0.0, 1.5, 0.0], atol=1e-14)


def test_korn_definiteness_after_constraints(forms_factory, rng):
    f = forms_factory(6)
    A, _ = apply_dirichlet(f.A, np.zeros(f.dofmap.ndofs), f.dofmap.constrained)
    free = f.dofmap.free
    quotients = []
    for _ in range(20):
        x = np.zeros(f.dofmap.ndofs)
        x[free] = rng.normal(size=free.size)
        quotients.append(x @ (A @ x) / (x @ x))
    assert min(quotients) > 0
    ev = np.linalg.eigvalsh(A.to_dense()[np.ix_(free, free)])
    assert ev.min() > 0


def test_mass_against_dense_oracle():
    m = uniform_triangulation(3)
    np.testing.assert_allclose(assemble_forms(m, 1.0, 1.0).M.to_dense(), dense_mass(m), atol=1e-15)
