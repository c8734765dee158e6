# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: ball sums, pair-difference sums, periodic interpolation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, pow, sqrt

cnp.import_array()


def ball_sums(const double[:, ::1] values,
              const cnp.int64_t[:, ::1] centers,
              const cnp.int64_t[:, ::1] offsets,
              const double[::1] weights,
              Py_ssize_t n):
    """out[m, c] = sum_o weights[o] * values[m, wrap(centers[c] + offsets[o])]."""
    cdef Py_ssize_t M = values.shape[0]
    cdef Py_ssize_t nc = centers.shape[0]
    cdef Py_ssize_t no = offsets.shape[0]
    cdef Py_ssize_t dim = centers.shape[1]
    cdef Py_ssize_t m, c, o, d, idx, q
    cdef double acc
    cdef cnp.int64_t[:, ::1] flat = np.empty((nc, no), dtype=np.int64)
    out = np.zeros((M, nc), dtype=np.float64)
    cdef double[:, ::1] res = out

    for c in range(nc):
        for o in range(no):
            idx = 0
            for d in range(dim):
                q = (centers[c, d] + offsets[o, d]) % n
                if q < 0:
                    q += n
                idx = idx * n + q
            flat[c, o] = idx

    for m in range(M):
        for c in range(nc):
            acc = 0.0
            for o in range(no):
                acc += weights[o] * values[m, flat[c, o]]
            res[m, c] = acc
    return out


def pair_difference_sum(const double[::1] f,
                        const double[:, ::1] coords,
                        const double[::1] weights,
                        double alpha):
    """sum over i != j of w_i w_j (f_i - f_j)^2 / |x_i - x_j|^(dim + 2 alpha)."""
    cdef Py_ssize_t P = f.shape[0]
    cdef Py_ssize_t dim = coords.shape[1]
    cdef Py_ssize_t i, j, d
    cdef double acc = 0.0, r2, diff, dx
    cdef double expo = 0.5 * (dim + 2.0 * alpha)
    for i in range(P):
        for j in range(i + 1, P):
            r2 = 0.0
            for d in range(dim):
                dx = coords[i, d] - coords[j, d]
                r2 += dx * dx
            diff = f[i] - f[j]
            acc += weights[i] * weights[j] * diff * diff / pow(r2, expo)
    return 2.0 * acc


def interp_periodic(const double[::1] field,
                    const double[:, ::1] points,
                    Py_ssize_t n):
    """Multilinear interpolation of a periodic grid function (C-order, n per axis).

    ``points`` are in grid-index units; the result is a convex combination of
    neighbouring values.
    """
    cdef Py_ssize_t Q = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    cdef Py_ssize_t q, d, corner, idx, i0
    cdef Py_ssize_t ncorner = 1 << dim
    cdef double w, acc, x
    cdef Py_ssize_t base[3]
    cdef double frac[3]
    out = np.empty(Q, dtype=np.float64)
    cdef double[::1] res = out
    for q in range(Q):
        for d in range(dim):
            x = points[q, d]
            i0 = <Py_ssize_t> floor(x)
            frac[d] = x - i0
            i0 = i0 % n
            if i0 < 0:
                i0 += n
            base[d] = i0
        acc = 0.0
        for corner in range(ncorner):
            w = 1.0
            idx = 0
            for d in range(dim):
                if (corner >> d) & 1:
                    w *= frac[d]
                    idx = idx * n + (base[d] + 1) % n
                else:
                    w *= 1.0 - frac[d]
                    idx = idx * n + base[d]
            acc += w * field[idx]
        res[q] = acc
    return out
