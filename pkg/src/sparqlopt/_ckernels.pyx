# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mapping-table kernels; same contract as _kernels_py."""
import numpy as np


cdef inline bint _compatible(const int[:, ::1] left, Py_ssize_t i,
                             const int[:, ::1] right, Py_ssize_t j,
                             Py_ssize_t width) noexcept nogil:
    cdef Py_ssize_t c
    cdef int x, y
    for c in range(width):
        x = left[i, c]
        y = right[j, c]
        if x != -1 and y != -1 and x != y:
            return False
    return True


def join_rows(left, right):
    cdef const int[:, ::1] L = np.ascontiguousarray(left, dtype=np.intc)
    cdef const int[:, ::1] R = np.ascontiguousarray(right, dtype=np.intc)
    cdef Py_ssize_t n = L.shape[0], m = R.shape[0], w = L.shape[1]
    cdef Py_ssize_t i, j, c, k = 0, count = 0
    cdef int x
    with nogil:
        for i in range(n):
            for j in range(m):
                if _compatible(L, i, R, j, w):
                    count += 1
    out = np.empty((count, w), dtype=np.intc)
    cdef int[:, ::1] O = out
    with nogil:
        for i in range(n):
            for j in range(m):
                if _compatible(L, i, R, j, w):
                    for c in range(w):
                        x = L[i, c]
                        O[k, c] = R[j, c] if x == -1 else x
                    k += 1
    return out


def minus_mask(left, right):
    cdef const int[:, ::1] L = np.ascontiguousarray(left, dtype=np.intc)
    cdef const int[:, ::1] R = np.ascontiguousarray(right, dtype=np.intc)
    cdef Py_ssize_t n = L.shape[0], m = R.shape[0], w = L.shape[1]
    cdef Py_ssize_t i, j
    out = np.ones(n, dtype=bool)
    cdef unsigned char[::1] keep = out.view(np.uint8)
    with nogil:
        for i in range(n):
            for j in range(m):
                if _compatible(L, i, R, j, w):
                    keep[i] = 0
                    break
    return out
