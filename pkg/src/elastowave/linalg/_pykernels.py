"""NumPy implementations of the hot kernels (used when the extension is absent)."""
import numpy as np


def csr_matvec(indptr, indices, data, x, nrows):
    rows = np.repeat(np.arange(nrows), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=nrows)


def cg(indptr, indices, data, b, x0, rel_tol, max_iter, inv_diag):
    nrows = b.shape[0]
    rows = np.repeat(np.arange(nrows), np.diff(indptr))

    def matvec(v):
        return np.bincount(rows, weights=data * v[indices], minlength=nrows)

    x = x0.copy()
    r = b - matvec(x)
    target = rel_tol * np.sqrt(b @ b)
    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = r @ z
    rnorm = np.sqrt(r @ r)
    it = 0
    while rnorm > target and it < max_iter:
        ap = matvec(p)
        pap = p @ ap
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        rnorm = np.sqrt(r @ r)
        z = r * inv_diag if inv_diag is not None else r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, it
