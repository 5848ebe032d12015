"""Pure-numpy versions of the compiled kernels, same signatures and semantics."""

from __future__ import annotations

import numpy as np


def psor(lower, diag, upper, rhs, psi, u, omega, tol, max_iter):
    """Red-black projected SOR; converges to the same solution as the ordered sweep."""
    n = u.shape[0]
    lower = np.asarray(lower); diag = np.asarray(diag); upper = np.asarray(upper)
    ext = np.zeros(n + 2)
    ext[1:-1] = u
    colours = [np.s_[0:n:2], np.s_[1:n:2]]
    for it in range(max_iter):
        err = 0.0
        for sl in colours:
            idx = np.arange(n)[sl]
            s = rhs[sl] - lower[sl] * ext[idx] - upper[sl] * ext[idx + 2]
            old = ext[idx + 1]
            y = np.maximum(old + omega * (s / diag[sl] - old), psi[sl])
            err = max(err, float(np.max(np.abs(y - old))) if y.size else 0.0)
            ext[idx + 1] = y
        if err < tol:
            u[:] = ext[1:-1]
            return it + 1
    u[:] = ext[1:-1]
    return -max_iter


def tree_backward(v, psi, p, disc, steps, record_after, start, width, american=True):
    n = v.shape[0]
    q = 1.0 - p
    recs = []
    r = 0
    record_after = np.asarray(record_after)
    while r < record_after.size and record_after[r] == 0:
        recs.append(v[start:start + width].copy())
        r += 1
    for k in range(1, steps + 1):
        lo, hi = k, n - 1 - k
        cont = disc * (p * v[lo + 1:hi + 2] + q * v[lo - 1:hi])
        if american:
            cont = np.maximum(cont, psi[lo:hi + 1])
        v[lo:hi + 1] = cont
        while r < record_after.size and record_after[r] == k:
            recs.append(v[start:start + width].copy())
            r += 1
    return np.array(recs).reshape(len(recs), width)
