# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring kernels: family count tallies and log-likelihood.

Must produce results identical to _scorekit_py; the counting is integer
exact and the log-likelihood accumulates terms in the same table order.
"""

from libc.math cimport log

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def family_counts(codes, int child, parents, int r):
    cdef const cnp.uint8_t[:, ::1] c = np.ascontiguousarray(codes, dtype=np.uint8)
    cdef const long[::1] par = np.ascontiguousarray(list(parents), dtype=np.int64)
    cdef Py_ssize_t n_par = par.shape[0]
    cdef Py_ssize_t s = c.shape[0]
    cdef long q = 1
    cdef Py_ssize_t k
    for k in range(n_par):
        q *= r
    out = np.zeros((q, r), dtype=np.int64)
    cdef long[:, ::1] counts = out
    cdef Py_ssize_t i
    cdef long j
    for i in range(s):
        j = 0
        for k in range(n_par):
            j = j * r + c[i, par[k]]
        counts[j, c[i, child]] += 1
    return out


def loglik_from_counts(counts):
    cdef const long[:, ::1] tab = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t q = tab.shape[0]
    cdef Py_ssize_t r = tab.shape[1]
    cdef double total = 0.0
    cdef double log_nj
    cdef long nj, njk
    cdef Py_ssize_t j, k
    for j in range(q):
        nj = 0
        for k in range(r):
            nj += tab[j, k]
        if nj == 0:
            continue
        log_nj = log(<double> nj)
        for k in range(r):
            njk = tab[j, k]
            if njk > 0:
                total += njk * (log(<double> njk) - log_nj)
    return total


def family_loglik(codes, int child, parents, int r):
    return loglik_from_counts(family_counts(codes, child, parents, r))
