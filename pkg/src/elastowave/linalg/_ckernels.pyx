# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR mat-vec and conjugate gradient loop."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

ctypedef cnp.int64_t idx_t


cdef void _matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
                  const double[::1] data, const double[::1] x,
                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = out.shape[0]
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            s += data[j] * x[indices[j]]
        out[i] = s


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x, Py_ssize_t nrows):
    out = np.empty(nrows)
    cdef double[::1] o = out
    with nogil:
        _matvec(indptr, indices, data, x, o)
    return out


def cg(const idx_t[::1] indptr, const idx_t[::1] indices,
       const double[::1] data, const double[::1] b, const double[::1] x0,
       double rel_tol, Py_ssize_t max_iter, inv_diag):
    cdef Py_ssize_t n = b.shape[0], i, it = 0
    cdef bint precond = inv_diag is not None
    cdef const double[::1] dinv
    x_arr = np.array(x0, copy=True)
    r_arr = np.empty(n)
    z_arr = np.empty(n)
    p_arr = np.empty(n)
    ap_arr = np.empty(n)
    cdef double[::1] x = x_arr, r = r_arr, z = z_arr, p = p_arr, ap = ap_arr
    cdef double target, rnorm, rz, rz_new, pap, alpha, beta
    if precond:
        dinv = inv_diag
    with nogil:
        _matvec(indptr, indices, data, x, ap)
        for i in range(n):
            r[i] = b[i] - ap[i]
        target = rel_tol * sqrt(_dot(b, b))
        if precond:
            for i in range(n):
                z[i] = r[i] * dinv[i]
        else:
            for i in range(n):
                z[i] = r[i]
        for i in range(n):
            p[i] = z[i]
        rz = _dot(r, z)
        rnorm = sqrt(_dot(r, r))
        while rnorm > target and it < max_iter:
            _matvec(indptr, indices, data, p, ap)
            pap = _dot(p, ap)
            if pap <= 0.0:
                break
            alpha = rz / pap
            for i in range(n):
                x[i] += alpha * p[i]
                r[i] -= alpha * ap[i]
            it += 1
            rnorm = sqrt(_dot(r, r))
            if precond:
                for i in range(n):
                    z[i] = r[i] * dinv[i]
            else:
                for i in range(n):
                    z[i] = r[i]
            rz_new = _dot(r, z)
            beta = rz_new / rz
            rz = rz_new
            for i in range(n):
                p[i] = z[i] + beta * p[i]
    return x_arr, it
