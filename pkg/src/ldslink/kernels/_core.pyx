# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernels; semantics mirror kernels/pyref.py."""

import numpy as np

BACKEND = "compiled"


def g_row(double[:, ::1] utab, double[:, ::1] psi, int[:, ::1] uid,
          int[::1] ncand, int[::1] assign, int i, int half_window):
    cdef int n = assign.shape[0]
    cdef int k = ncand[i]
    cdef int lo = i - half_window if i - half_window > 0 else 0
    cdef int hi = i + half_window + 1 if i + half_window + 1 < n else n
    cdef int j, c
    cdef int nctx = hi - lo - 1  # window always contains i itself
    cdef double acc
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ov = out
    for j in range(k):
        if nctx == 0:
            ov[j] = psi[i, j]
            continue
        acc = 0.0
        for c in range(lo, hi):
            if c != i:
                acc += utab[uid[c, assign[c]], uid[i, j]]
        ov[j] = psi[i, j] + acc / nctx
    return out


def sweep_argmax(double[:, ::1] utab, double[:, ::1] psi, int[:, ::1] uid,
                 int[::1] ncand, int[::1] assign, int[::1] targets,
                 int half_window):
    cdef int n = assign.shape[0]
    cdef int nt = targets.shape[0]
    cdef int t, i, j, c, lo, hi, k, best, nctx
    cdef double acc, g, best_g
    out = np.empty(nt, dtype=np.int32)
    cdef int[::1] ov = out
    for t in range(nt):
        i = targets[t]
        k = ncand[i]
        lo = i - half_window if i - half_window > 0 else 0
        hi = i + half_window + 1 if i + half_window + 1 < n else n
        nctx = hi - lo - 1
        best = 0
        best_g = -1e300
        for j in range(k):
            if nctx == 0:
                g = psi[i, j]
            else:
                acc = 0.0
                for c in range(lo, hi):
                    if c != i:
                        acc += utab[uid[c, assign[c]], uid[i, j]]
                g = psi[i, j] + acc / nctx
            if g > best_g:
                best_g = g
                best = j
        ov[t] = best
    return out


def pair_sum(double[:, ::1] utab, int[:, ::1] uid, int[::1] assign,
             int half_window):
    cdef int n = assign.shape[0]
    cdef int i, j, hi
    cdef double acc = 0.0
    for i in range(n):
        hi = i + half_window + 1 if i + half_window + 1 < n else n
        for j in range(i + 1, hi):
            acc += utab[uid[i, assign[i]], uid[j, assign[j]]]
    return acc
