# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: projected SOR sweeps and lattice backward induction."""

from libc.math cimport fabs

import numpy as np


def psor(const double[::1] lower, const double[::1] diag, const double[::1] upper,
         const double[::1] rhs, const double[::1] psi, double[::1] u,
         double omega, double tol, int max_iter):
    """Projected SOR on a tridiagonal system, in place on ``u``.

    Returns the number of sweeps, negated when ``tol`` was not reached.
    """
    cdef Py_ssize_t n = u.shape[0], j
    cdef int it, done = -max_iter
    cdef double s, y, d, err
    with nogil:
        for it in range(max_iter):
            err = 0.0
            for j in range(n):
                s = rhs[j]
                if j > 0:
                    s = s - lower[j] * u[j - 1]
                if j < n - 1:
                    s = s - upper[j] * u[j + 1]
                y = u[j] + omega * (s / diag[j] - u[j])
                if y < psi[j]:
                    y = psi[j]
                d = fabs(y - u[j])
                if d > err:
                    err = d
                u[j] = y
            if err < tol:
                done = it + 1
                break
    return done


def tree_backward(double[::1] v, const double[::1] psi, double p, double disc,
                  int steps, const long[::1] record_after, Py_ssize_t start,
                  Py_ssize_t width, bint american=True):
    """Backward induction on a full binomial lattice, in place on ``v``.

    After ``k`` steps the valid nodes are ``k .. len(v) - 1 - k``.  A copy of
    ``v[start:start + width]`` is taken after each step count listed in
    ``record_after`` (ascending, may include 0).
    """
    cdef Py_ssize_t n = v.shape[0], j, lo, hi, r = 0
    cdef Py_ssize_t n_rec = record_after.shape[0]
    cdef int k
    cdef double q = 1.0 - p, old, prev, cont
    out = np.empty((n_rec, width))
    cdef double[:, ::1] rec = out
    while r < n_rec and record_after[r] == 0:
        rec[r, :] = v[start:start + width]
        r += 1
    for k in range(1, steps + 1):
        lo = k
        hi = n - 1 - k
        with nogil:
            prev = v[lo - 1]
            for j in range(lo, hi + 1):
                old = v[j]
                cont = disc * (p * v[j + 1] + q * prev)
                if american and cont < psi[j]:
                    cont = psi[j]
                v[j] = cont
                prev = old
        while r < n_rec and record_after[r] == k:
            rec[r, :] = v[start:start + width]
            r += 1
    return out
