# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in :mod:`wavemarg._kernels._pykernels`."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def realloc_sweep(phi, t, int n_particles):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] src = np.ascontiguousarray(phi, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ratio = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t block = ratio.shape[0]
    cdef Py_ssize_t rest_size = 1
    cdef Py_ssize_t p0, r, base, width
    cdef int j
    for j in range(n_particles - 1):
        rest_size *= block
    cdef double[::1] tv = ratio
    # rest[r]: sum of t over the digits of r (blocks 2..N), built digit by digit
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rest_arr = np.zeros(rest_size, dtype=np.float64)
    cdef double[::1] rest = rest_arr
    width = 1
    for j in range(n_particles - 1):
        for r in range(width * block - 1, -1, -1):
            rest[r] = rest[r // block] + tv[r % block]
        width *= block
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dst = np.empty_like(src)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sigma = np.zeros(block, dtype=np.float64)
    cdef double[::1] sv = src
    cdef double[::1] dv = dst
    cdef double[::1] mv = sigma
    cdef double s, t0, v, acc
    cdef double inv_n = 1.0 / n_particles
    for p0 in range(block):
        t0 = tv[p0]
        acc = 0.0
        base = p0 * rest_size
        for r in range(rest_size):
            s = 1.0 - (t0 + rest[r]) * inv_n
            if s < 0.0:
                s = 0.0
            v = sv[base + r] * sqrt(s)
            dv[base + r] = v
            acc += v * v
        mv[p0] = acc
    return dst.reshape(np.shape(phi)), sigma


def _grad_sq_sum_real(cnp.ndarray f):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(f, dtype=np.float64).ravel()
    cdef double[::1] fv = flat
    cdef Py_ssize_t total_size = flat.shape[0]
    cdef Py_ssize_t stride, size, outer, o, c, k, base
    cdef double diff, total = 0.0
    cdef int axis, j
    cdef int ndim = f.ndim
    for axis in range(ndim):
        size = f.shape[axis]
        stride = 1
        for j in range(axis + 1, ndim):
            stride *= f.shape[j]
        outer = total_size // (size * stride)
        for o in range(outer):
            base = o * size * stride
            for c in range(size - 1):
                for k in range(stride):
                    diff = fv[base + (c + 1) * stride + k] - fv[base + c * stride + k]
                    total += diff * diff
            base += (size - 1) * stride
            for k in range(stride):
                total += fv[base + k] * fv[base + k]
    return total


def grad_sq_sum(f):
    f = np.asarray(f)
    if np.iscomplexobj(f):
        return _grad_sq_sum_real(np.ascontiguousarray(f.real)) + _grad_sq_sum_real(
            np.ascontiguousarray(f.imag))
    return _grad_sq_sum_real(f)
