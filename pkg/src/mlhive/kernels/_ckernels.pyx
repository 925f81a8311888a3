# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance kernels."""

import numpy as np


def pairwise_sq_euclidean(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("inputs must be 2-D")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    _sq_euclidean_impl(a, b, out)
    return out


def pairwise_manhattan(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("inputs must be 2-D")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    _manhattan_impl(a, b, out)
    return out


cdef void _sq_euclidean_impl(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            out[i, j] = acc


cdef void _manhattan_impl(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff if diff >= 0.0 else -diff
            out[i, j] = acc
