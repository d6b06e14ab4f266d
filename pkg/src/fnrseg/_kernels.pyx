# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next(uint64_t* s) noexcept nogil:
    cdef uint64_t result = _rotl(s[1] * 5, 7) * 9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


cdef inline uint64_t _bounded(uint64_t* s, uint64_t bound) noexcept nogil:
    cdef uint64_t threshold = (0 - bound) % bound
    cdef uint64_t r
    while True:
        r = _next(s)
        if r >= threshold:
            return r % bound


def xoshiro_fill_u64(uint64_t[::1] state, uint64_t[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = _next(&state[0])


def xoshiro_fill_uniform(uint64_t[::1] state, double[::1] out):
    cdef Py_ssize_t i
    cdef double scale = 1.0 / 9007199254740992.0
    with nogil:
        for i in range(out.shape[0]):
            out[i] = <double>(_next(&state[0]) >> 11) * scale


def xoshiro_permutation(uint64_t[::1] state, Py_ssize_t n):
    perm_arr = np.arange(n, dtype=np.int64)
    cdef int64_t[::1] perm = perm_arr
    cdef Py_ssize_t i, j
    cdef int64_t tmp
    with nogil:
        i = n - 1
        while i > 0:
            j = <Py_ssize_t>_bounded(&state[0], <uint64_t>(i + 1))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
            i -= 1
    return perm_arr


cdef inline Py_ssize_t _count(const double[::1] values, double cut) noexcept nogil:
    cdef Py_ssize_t i, n = 0
    for i in range(values.shape[0]):
        if values[i] >= cut:
            n += 1
    return n


def count_at_least(const double[::1] values, double cut):
    cdef Py_ssize_t n
    with nogil:
        n = _count(values, cut)
    return n


def bisect_critical(const double[::1] lesion, double epsilon, double delta):
    cdef double m = <double>lesion.shape[0]
    cdef double t_min = 0.0, t_max = 1.0, t, loss
    cdef long iterations = 0
    with nogil:
        while t_max - t_min > delta:
            t = 0.5 * (t_min + t_max)
            loss = 1.0 - <double>_count(lesion, 1.0 - t) / m
            if loss > epsilon:
                t_min = t
            else:
                t_max = t
            iterations += 1
    return t_max, iterations
