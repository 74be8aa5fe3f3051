# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for arithmetic mod 2**61 - 1.

Products use a 128-bit intermediate and the Mersenne shift-add reduction.
"""

from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

cdef uint64_t Q = (<uint64_t>1 << 61) - 1


cdef inline uint64_t mulmod(uint64_t a, uint64_t b) noexcept nogil:
    cdef u128 p = <u128>a * <u128>b
    cdef uint64_t r = <uint64_t>(p & Q) + <uint64_t>(p >> 61)
    if r >= Q:
        r -= Q
    return r


cdef inline uint64_t submod(uint64_t a, uint64_t b) noexcept nogil:
    return a - b if a >= b else a + Q - b


def mul_fold(init, factors):
    cdef uint64_t acc = init % Q
    cdef uint64_t f
    for x in factors:
        f = x % Q
        acc = mulmod(acc, f)
    return acc


def set_equality_batch(points, a, b, child_pairs):
    cdef Py_ssize_t k = len(points)
    cdef Py_ssize_t m = len(child_pairs)
    cdef Py_ssize_t i, j
    cdef uint64_t ua = a % Q
    cdef uint64_t ub = b % Q
    cdef uint64_t *p0 = <uint64_t *>malloc(k * sizeof(uint64_t))
    cdef uint64_t *p1 = <uint64_t *>malloc(k * sizeof(uint64_t))
    if p0 == NULL or p1 == NULL:
        free(p0)
        free(p1)
        raise MemoryError()
    try:
        for i in range(k):
            v = points[i] % Q
            p0[i] = submod(v, ua)
            p1[i] = submod(v, ub)
        for j in range(m):
            pairs = child_pairs[j]
            if len(pairs) != k:
                raise ValueError("child pair count does not match point count")
            for i in range(k):
                c0, c1 = pairs[i]
                p0[i] = mulmod(p0[i], <uint64_t>c0)
                p1[i] = mulmod(p1[i], <uint64_t>c1)
        return tuple([(p0[i], p1[i]) for i in range(k)])
    finally:
        free(p0)
        free(p1)
