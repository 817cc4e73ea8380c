# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Must agree exactly with ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport llabs

cnp.import_array()


cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil


cdef inline int _parity(unsigned long long v) nogil:
    return __builtin_parityll(v)


def hadamard_bits(symbols, columns):
    cdef const cnp.int64_t[::1] s = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    cdef const cnp.int64_t[::1] c = np.ascontiguousarray(np.broadcast_to(columns, np.shape(symbols)), dtype=np.int64).ravel()
    cdef Py_ssize_t n = s.shape[0], i
    out = np.empty(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = 1 - _parity(<unsigned long long>(s[i] & c[i]))
    return out.reshape(np.shape(symbols))


def central_z(x, x2, y, y2):
    a = np.ascontiguousarray(x, dtype=np.int64)
    squeeze = a.ndim == 1
    cdef const cnp.int64_t[:, ::1] A = np.atleast_2d(a)
    cdef const cnp.int64_t[:, ::1] A2 = np.atleast_2d(np.ascontiguousarray(x2, dtype=np.int64))
    cdef const cnp.int64_t[:, ::1] B = np.atleast_2d(np.ascontiguousarray(y, dtype=np.int64))
    cdef const cnp.int64_t[:, ::1] B2 = np.atleast_2d(np.ascontiguousarray(y2, dtype=np.int64))
    cdef Py_ssize_t rows = A.shape[0], k = A.shape[1], r, i
    if A2.shape[0] != rows or B.shape[0] != rows or B2.shape[0] != rows:
        raise ValueError("row count mismatch")
    if A2.shape[1] != k or B.shape[1] != k or B2.shape[1] != k:
        raise ValueError("dimension mismatch")
    out = np.empty(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef cnp.int64_t acc
    with nogil:
        for r in range(rows):
            acc = 0
            for i in range(k):
                acc += (llabs(A[r, i] - B[r, i]) + llabs(A2[r, i] - B2[r, i])
                        - llabs(A[r, i] - A2[r, i]) - llabs(B[r, i] - B2[r, i]))
            o[r] = acc
    return out[0] if squeeze else out


def uneven_stat(x, y, double n1, double n2):
    a = np.ascontiguousarray(x, dtype=np.float64)
    squeeze = a.ndim == 1
    cdef const double[:, ::1] X = np.atleast_2d(a)
    cdef const double[:, ::1] Y = np.atleast_2d(np.ascontiguousarray(y, dtype=np.float64))
    cdef Py_ssize_t rows = X.shape[0], k = X.shape[1], r, i
    if Y.shape[0] != rows or Y.shape[1] != k:
        raise ValueError("dimension mismatch")
    out = np.empty(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, xi, yi, d
    with nogil:
        for r in range(rows):
            acc = 0.0
            for i in range(k):
                xi = X[r, i]
                yi = Y[r, i]
                if xi + yi > 0:
                    d = n2 * xi - n1 * yi
                    acc += (d * d - n2 * n2 * xi - n1 * n1 * yi) / (xi + yi)
            o[r] = acc
    return out[0] if squeeze else out


cdef inline long long _terms(long long a, long long a2, long long b, long long b2) nogil:
    return llabs(a - b) + llabs(a2 - b2) - llabs(a - a2) - llabs(b - b2)


def max_sensitivity(x, x2, y, y2):
    cdef const cnp.int64_t[:, ::1] H = np.ascontiguousarray(np.stack([x, x2, y, y2]), dtype=np.int64)
    cdef Py_ssize_t k = H.shape[1], h, i, j
    cdef long long best = 0, before, after, v[4], w[4]
    cdef int t
    with nogil:
        for h in range(4):
            for i in range(k):
                if H[h, i] <= 0:
                    continue
                for j in range(k):
                    if j == i:
                        continue
                    for t in range(4):
                        v[t] = H[t, i]
                        w[t] = H[t, j]
                    before = _terms(v[0], v[1], v[2], v[3]) + _terms(w[0], w[1], w[2], w[3])
                    v[h] -= 1
                    w[h] += 1
                    after = _terms(v[0], v[1], v[2], v[3]) + _terms(w[0], w[1], w[2], w[3])
                    if llabs(after - before) > best:
                        best = llabs(after - before)
    return int(best)
