# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the equilibrium-layer sweeps (hot inner loops)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport tanh

ACT_RELU = 0
ACT_TANH = 1


def equilibrium_sweep(double[:, ::1] D11, double[:, ::1] bw, int act):
    """Row-by-row solve of w = sigma(D11 w + bw); bw is (batch, q)."""
    cdef Py_ssize_t B = bw.shape[0]
    cdef Py_ssize_t q = bw.shape[1]
    out = np.empty((B, q), dtype=np.float64)
    cdef double[:, ::1] w = out
    cdef Py_ssize_t b, i, j
    cdef double acc
    for b in range(B):
        for i in range(q):
            acc = bw[b, i]
            for j in range(i):
                acc += D11[i, j] * w[b, j]
            if act == 1:
                w[b, i] = tanh(acc)
            else:
                w[b, i] = acc if acc > 0.0 else 0.0
    return out


def sweep_backward(double[:, ::1] D11, double[:, ::1] lam, double[:, ::1] g):
    """Adjoint back-substitution: solves (I - D11^T Lambda) t = g per sample."""
    cdef Py_ssize_t B = g.shape[0]
    cdef Py_ssize_t q = g.shape[1]
    out = np.empty((B, q), dtype=np.float64)
    cdef double[:, ::1] t = out
    cdef Py_ssize_t b, i, j
    cdef double acc
    for b in range(B):
        for i in range(q - 1, -1, -1):
            acc = g[b, i]
            for j in range(i + 1, q):
                acc += D11[j, i] * lam[b, j] * t[b, j]
            t[b, i] = acc
    return out
