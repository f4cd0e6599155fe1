"""Sparse matrices and the conjugate-gradient solver.

The mat-vec and CG loop come from the compiled ``_ckernels`` extension when
it is importable and from NumPy otherwise.  Set ``ELASTOWAVE_BACKEND=python``
to force the NumPy path.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _pykernels
from .sparse import SparseMatrix, TripletBuilder, linear_combination, transpose

try:
    if os.environ.get("ELASTOWAVE_BACKEND", "").lower() == "python":
        raise ImportError("compiled backend disabled by environment")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels
BACKEND = "cython" if _ckernels is not None else "python"
_kernels = BACKENDS[BACKEND]

__all__ = [
    "BACKEND", "BACKENDS", "CGResult", "SolverError", "SparseMatrix",
    "TripletBuilder", "cg_solve", "linear_combination", "set_backend", "spmv", "transpose",
]


class SolverError(RuntimeError):
    """CG did not reach the requested tolerance; carries the result."""

    def __init__(self, result: "CGResult"):
        super().__init__(
            f"CG did not converge in {result.iterations} iterations "
            f"(relative residual {result.relative_residual:.3e})"
        )
        self.result = result


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    relative_residual: float
    converged: bool


def set_backend(name: str) -> str:
    """Make ``name`` the default kernel set and return the previous one.

    Intended for benchmarks and tests; modules that copied ``BACKEND`` at
    import keep their copy.
    """
    global BACKEND, _kernels
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}")
    previous, BACKEND, _kernels = BACKEND, name, BACKENDS[name]
    return previous


def _kern(backend):
    return _kernels if backend is None else BACKENDS[backend]


def spmv(a: SparseMatrix, x, *, backend: str | None = None) -> np.ndarray:
    """Return ``a @ x``."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (a.ncols,):
        raise ValueError(f"vector of length {x.shape} does not match {a.ncols} columns")
    return _kern(backend).csr_matvec(a.row_offsets, a.col_indices, a.values, x, a.nrows)


def cg_solve(a: SparseMatrix, b, rel_tol: float = 1e-10, max_iter: int | None = None,
             x0=None, jacobi: bool = False, raise_on_failure: bool = True,
             backend: str | None = None) -> CGResult:
    """Solve the SPD system ``a x = b`` by (Jacobi-preconditioned) CG.

    Stops once ``||b - a x|| <= rel_tol * ||b||``.  Without convergence
    within ``max_iter`` (default ``10 * nrows``) a :class:`SolverError` is
    raised, or the unconverged result is returned if ``raise_on_failure``
    is false.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    b = np.ascontiguousarray(b, dtype=float)
    if a.nrows != a.ncols:
        raise ValueError("matrix must be square")
    if b.shape != (a.nrows,):
        raise ValueError(f"right-hand side of length {b.shape} does not match {a.nrows} rows")
    if max_iter is None:
        max_iter = 10 * a.nrows
    bnorm = float(np.sqrt(b @ b))
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0, 0.0, True)
    x0 = np.zeros_like(b) if x0 is None else np.ascontiguousarray(x0, dtype=float)
    inv_diag = None
    if jacobi:
        d = a.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi preconditioning needs a positive diagonal")
        inv_diag = 1.0 / d
    kern = _kern(backend)
    x, total = x0, 0
    # restart from the true residual if the recursive one drifted below target
    for _ in range(4):
        x, it = kern.cg(a.row_offsets, a.col_indices, a.values, b, x,
                        float(rel_tol), int(max_iter - total), inv_diag)
        total += it
        r = b - spmv(a, x, backend=backend)
        res = float(np.sqrt(r @ r))
        if res <= rel_tol * bnorm or total >= max_iter or it == 0:
            break
    result = CGResult(x, total, res, res / bnorm, res <= rel_tol * bnorm)
    if not result.converged and raise_on_failure:
        raise SolverError(result)
    return result
