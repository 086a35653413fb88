# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_fallback.py`` mirrors every function here bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def outcome_counts(const uint8_t[:, ::1] failures, const uint8_t[:, ::1] mask):
    cdef Py_ssize_t n = failures.shape[0], k = failures.shape[1]
    cdef Py_ssize_t j, i
    cdef int64_t[::1] fail_counts = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] counts = np.zeros(k, dtype=np.int64)
    cdef uint64_t[::1] codes = np.zeros(n, dtype=np.uint64)
    cdef int64_t n_systemic = 0
    cdef bint all_fail, any_seen
    cdef uint64_t code
    if k > 64:
        raise ValueError("outcome_counts supports at most 64 deployments")
    with nogil:
        for j in range(n):
            all_fail = True
            any_seen = False
            code = 0
            for i in range(k):
                if mask[j, i]:
                    any_seen = True
                    code |= (<uint64_t>1) << i
                    counts[i] += 1
                    if failures[j, i]:
                        fail_counts[i] += 1
                    else:
                        all_fail = False
            codes[j] = code
            if all_fail and any_seen:
                n_systemic += 1
    return np.asarray(fail_counts), np.asarray(counts), int(n_systemic), np.asarray(codes)


def group_counts(const uint8_t[:, ::1] failures, const uint8_t[:, ::1] mask,
                 const int64_t[:, ::1] codes, Py_ssize_t n_groups):
    cdef Py_ssize_t n = failures.shape[0], k = failures.shape[1]
    cdef Py_ssize_t j, i
    cdef int64_t g
    cdef int64_t[:, ::1] fail_counts = np.zeros((n_groups, k), dtype=np.int64)
    cdef int64_t[:, ::1] counts = np.zeros((n_groups, k), dtype=np.int64)
    with nogil:
        for j in range(n):
            for i in range(k):
                if mask[j, i]:
                    g = codes[j, i]
                    counts[g, i] += 1
                    if failures[j, i]:
                        fail_counts[g, i] += 1
    return np.asarray(fail_counts), np.asarray(counts)


def permuted_statistics(const double[::1] x, const double[::1] y, uint64_t seed,
                        Py_ssize_t start, Py_ssize_t stop):
    """Dot products of ``x`` with ``y`` under permutations ``start..stop-1``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p, i, j, tmp
    cdef uint64_t base = mix64(seed), state, z
    cdef double acc
    cdef cnp.intp_t[::1] perm = np.empty(n, dtype=np.intp)
    cdef double[::1] out = np.empty(stop - start, dtype=np.float64)
    with nogil:
        for p in range(start, stop):
            for i in range(n):
                perm[i] = i
            state = mix64(base + (<uint64_t>(p + 1)) * GOLDEN)
            for i in range(n - 1, 0, -1):
                state = state + GOLDEN
                z = mix64(state)
                j = <Py_ssize_t>(((z >> 32) * <uint64_t>(i + 1)) >> 32)
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            acc = 0.0
            for i in range(n):
                acc = acc + x[i] * y[perm[i]]
            out[p - start] = acc
    return np.asarray(out)
