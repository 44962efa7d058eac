# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tridiagonal and projected-SOR kernels.

Signatures mirror :mod:`amchooser._kernels._pykernels` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def thomas(const double[::1] lower, const double[::1] diag,
           const double[::1] upper, const double[::1] rhs):
    """Solve a tridiagonal system; returns (x, status).

    ``status`` is -1 on success, otherwise the row index of the first
    pivot whose magnitude fell below 1e-300.
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double piv
    x_arr = np.empty(n, dtype=np.float64)
    cp_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] cp = cp_arr
    if n == 0:
        return x_arr, -1
    piv = diag[0]
    if fabs(piv) < 1e-300:
        return x_arr, 0
    cp[0] = upper[0] / piv if n > 1 else 0.0
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if fabs(piv) < 1e-300:
            return x_arr, i
        cp[i] = upper[i] / piv if i < n - 1 else 0.0
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x_arr, -1


def psor(const double[::1] lower, const double[::1] diag,
         const double[::1] upper, const double[::1] rhs,
         const double[::1] obstacle, const double[::1] x0,
         double omega, double tol, int max_iter):
    """Projected SOR for the tridiagonal LCP; returns (x, iters, last_delta)."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef int it = 0
    cdef double delta = 0.0, gs, new, d
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    for i in range(n):
        if x[i] < obstacle[i]:
            x[i] = obstacle[i]
    while it < max_iter:
        it += 1
        delta = 0.0
        for i in range(n):
            gs = rhs[i]
            if i > 0:
                gs -= lower[i] * x[i - 1]
            if i < n - 1:
                gs -= upper[i] * x[i + 1]
            gs /= diag[i]
            new = x[i] + omega * (gs - x[i])
            if new < obstacle[i]:
                new = obstacle[i]
            d = fabs(new - x[i])
            if d > delta:
                delta = d
            x[i] = new
        if delta <= tol:
            break
    return x_arr, it, delta
