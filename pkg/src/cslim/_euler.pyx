# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler stepper for periodic linear SDEs.

Must stay operation-for-operation identical to ``_euler_py.euler_chunk``.
"""
from libc.math cimport fabs


def euler_chunk(const double[:, :, ::1] drift,
                const double[:, :, ::1] noise,
                double[::1] x,
                const double[:, ::1] xi,
                Py_ssize_t step0,
                Py_ssize_t rec_start,
                Py_ssize_t rec_every,
                double[:, ::1] out,
                double limit):
    cdef Py_ssize_t P = drift.shape[0]
    cdef Py_ssize_t n = drift.shape[1]
    cdef Py_ssize_t m = xi.shape[0]
    cdef Py_ssize_t i, r, c, g, p, k
    cdef double acc
    cdef double y[64]
    if n > 64:
        raise ValueError("compiled kernel supports n <= 64")
    for i in range(m):
        g = step0 + i
        p = (g - rec_start) % P
        if p < 0:
            p += P
        for r in range(n):
            acc = x[r]
            for c in range(n):
                acc = acc + drift[p, r, c] * x[c]
            for c in range(n):
                acc = acc + noise[p, r, c] * xi[i, c]
            y[r] = acc
        for r in range(n):
            x[r] = y[r]
            if not fabs(y[r]) <= limit:
                return g + 1
        k = g + 1 - rec_start
        if k >= 0 and k % rec_every == 0:
            k = k // rec_every
            for r in range(n):
                out[k, r] = y[r]
    return -1
