"""Fully discrete midpoint time stepping, initial projections and energy.

With ``F`` and ``G`` frozen at ``u^n`` each step is a single SPD solve::

    (M + k^2/2 A) u^{n+1} = (M - k^2/2 A) u^n + k M v^n
                            + k dW b_G(u^n) + k^2 b_F(u^n)
    v^{n+1} = (u^{n+1} - u^n) / k
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    BilinearForms, apply_dirichlet, assemble_load, element_dofs,
    integrate_against_basis, quadrature_points,
)
from .linalg import SolverError, SparseMatrix, cg_solve, linear_combination, spmv
from .mesh import Mesh
from .model import ModelSpec, eval_F, eval_G, eval_initial


class StepFailure(RuntimeError):
    def __init__(self, n: int, residual: float):
        super().__init__(f"linear solve failed at step {n} (relative residual {residual:.3e})")
        self.n = n
        self.residual = residual


@dataclass(frozen=True, eq=False)
class StepperState:
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    n: int = 0
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class StepOperator:
    forms: BilinearForms
    k: float
    S: SparseMatrix = field(repr=False)
    rel_tol: float = 1e-10
    jacobi: bool = False

    @property
    def mesh(self) -> Mesh:
        return self.forms.mesh


def make_step_operator(forms: BilinearForms, k: float, rel_tol: float = 1e-10,
                       jacobi: bool = False) -> StepOperator:
    if k <= 0:
        raise ValueError("time step must be positive")
    S = linear_combination([(1.0, forms.M), (0.5 * k * k, forms.A)])
    S, _ = apply_dirichlet(S, np.zeros(S.nrows), forms.dofmap.constrained)
    return StepOperator(forms, float(k), S, rel_tol, jacobi)


def _solve(a, b, x0, rel_tol, jacobi, n=0):
    try:
        return cg_solve(a, b, rel_tol=rel_tol, x0=x0, jacobi=jacobi).x
    except SolverError as exc:
        raise StepFailure(n, exc.result.relative_residual) from exc


def ritz_rhs(forms: BilinearForms, grad_u0: np.ndarray) -> np.ndarray:
    """``lam (div u0, div phi) + mu (eps(u0), eps(phi))`` by quadrature.

    ``grad_u0`` holds the Jacobian at the quadrature points, shape (T, 3, 2, 2).
    """
    mesh = forms.mesh
    g = mesh.basis_gradients
    div = np.trace(grad_u0, axis1=-2, axis2=-1)
    eps = 0.5 * (grad_u0 + np.swapaxes(grad_u0, -1, -2))
    # integrand is constant in phi's gradient, so weights multiply directly
    w = mesh.signed_areas[:, None] / 3.0
    term_div = np.einsum("tq,tq,tac->tac", w, div, g)
    term_eps = np.einsum("tq,tqcj,taj->tac", w, eps, g)
    local = forms.lam * term_div + forms.mu * term_eps
    return np.bincount(element_dofs(mesh).ravel(), weights=local.reshape(-1),
                       minlength=forms.dofmap.ndofs)


def ritz_projection(forms: BilinearForms, rhs: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    A, b = apply_dirichlet(forms.A, rhs, forms.dofmap.constrained)
    return _solve(A, b, None, rel_tol, False)


def l2_projection(forms: BilinearForms, rhs: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    M, b = apply_dirichlet(forms.M, rhs, forms.dofmap.constrained)
    return _solve(M, b, None, rel_tol, False)


def init_state(mesh: Mesh, forms: BilinearForms, spec: ModelSpec,
               rel_tol: float = 1e-12) -> StepperState:
    """``u = R_h u0`` (elastic projection), ``v = P_h v0`` (L2 projection)."""
    ndofs = forms.dofmap.ndofs
    if spec.initial_kind == "zero":
        return StepperState(np.zeros(ndofs), np.zeros(ndofs))
    if spec.initial_kind == "custom":
        u_nodal = np.asarray(spec.custom_u0, dtype=float)
        v_nodal = (np.zeros(ndofs) if spec.custom_v0 is None
                   else np.asarray(spec.custom_v0, dtype=float))
        if u_nodal.shape != (ndofs,) or v_nodal.shape != (ndofs,):
            raise ValueError("custom initial data does not match the mesh dofs")
        r, m = spmv(forms.A, u_nodal), spmv(forms.M, v_nodal)
    else:
        _, grad, v0 = eval_initial(spec, quadrature_points(mesh))
        r = ritz_rhs(forms, grad)
        m = integrate_against_basis(mesh, v0, ndofs)
    return StepperState(ritz_projection(forms, r, rel_tol), l2_projection(forms, m, rel_tol))


def forcing(op: StepOperator, spec: ModelSpec, u: np.ndarray, dW: float) -> np.ndarray:
    """``k dW b_G(u) + k^2 b_F(u)`` assembled in one quadrature pass."""
    k = op.k
    use_f = spec.F_kind != "zero"
    use_g = spec.G_kind != "zero" and dW != 0.0

    def f(x, uq):
        out = np.zeros_like(uq)
        if use_f:
            out += (k * k) * eval_F(spec, uq)
        if use_g:
            out += (k * dW) * eval_G(spec, uq)
        return out

    if not (use_f or use_g):
        return np.zeros_like(u)
    return assemble_load(op.mesh, op.forms.dofmap, f, u)


def step(op: StepOperator, state: StepperState, dW: float, spec: ModelSpec) -> StepperState:
    forms, k = op.forms, op.k
    rhs = spmv(forms.M, state.u + k * state.v) - (0.5 * k * k) * spmv(forms.A, state.u)
    rhs += forcing(op, spec, state.u, dW)
    rhs[forms.dofmap.constrained] = 0.0
    u_new = _solve(op.S, rhs, state.u, op.rel_tol, op.jacobi, state.n)
    u_new[forms.dofmap.constrained] = 0.0
    v_new = (u_new - state.u) / k
    return StepperState(u_new, v_new, state.n + 1, (state.n + 1) * k)


def energy(state: StepperState, forms: BilinearForms) -> float:
    """``(|v|^2 + lam |div u|^2 + mu |eps(u)|^2) / 2``."""
    return 0.5 * (float(state.v @ spmv(forms.M, state.v)) + float(state.u @ spmv(forms.A, state.u)))


def run(op: StepOperator, state: StepperState, increments, spec: ModelSpec,
        callback=None) -> StepperState:
    """Advance through all ``increments``; ``callback(state)`` sees every new state."""
    for dW in np.asarray(increments, dtype=float):
        state = step(op, state, float(dW), spec)
        if callback is not None:
            callback(state)
    return state
