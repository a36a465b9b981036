# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled monomial kernels: matrix elements of sum_j v_j b†_Qj b_Pj over
sorted occupation words.  Mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t

cnp.import_array()

BACKEND = "cython"

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int64_t _find(const uint64_t[::1] configs, uint64_t word) noexcept nogil:
    cdef int64_t lo = 0, hi = configs.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if configs[mid] < word:
            lo = mid + 1
        else:
            hi = mid
    if lo < configs.shape[0] and configs[lo] == word:
        return lo
    return -1


cdef inline int _act(uint64_t word, const int32_t[::1] q_flat, int64_t q0, int64_t q1,
                     const int32_t[::1] p_flat, int64_t p0, int64_t p1,
                     uint64_t* out) noexcept nogil:
    """Returns 0 on annihilation, otherwise +1/-1 with the new word in ``out``."""
    cdef int sign = 1
    cdef int64_t t
    cdef uint64_t bit
    for t in range(p0, p1):
        bit = (<uint64_t>1) << p_flat[t]
        if not (word & bit):
            return 0
        if __builtin_popcountll(word & (bit - 1)) & 1:
            sign = -sign
        word ^= bit
    t = q1 - 1
    while t >= q0:
        bit = (<uint64_t>1) << q_flat[t]
        if word & bit:
            return 0
        if __builtin_popcountll(word & (bit - 1)) & 1:
            sign = -sign
        word |= bit
        t -= 1
    out[0] = word
    return sign


def monomial_coo(configs, q_flat, q_off, p_flat, p_off, values):
    cdef const uint64_t[::1] cfg = np.ascontiguousarray(configs, dtype=np.uint64)
    cdef const int32_t[::1] qf = np.ascontiguousarray(q_flat, dtype=np.int32)
    cdef const int64_t[::1] qo = np.ascontiguousarray(q_off, dtype=np.int64)
    cdef const int32_t[::1] pf = np.ascontiguousarray(p_flat, dtype=np.int32)
    cdef const int64_t[::1] po = np.ascontiguousarray(p_off, dtype=np.int64)
    cdef const double complex[::1] val = np.ascontiguousarray(values, dtype=np.complex128)
    cdef int64_t dim = cfg.shape[0], n_mono = val.shape[0]
    cdef int64_t cap = max(dim, 16), n = 0, i, j, tgt
    cdef int sign
    cdef uint64_t new_word

    rows_arr = np.empty(cap, dtype=np.int64)
    cols_arr = np.empty(cap, dtype=np.int64)
    vals_arr = np.empty(cap, dtype=np.complex128)
    cdef int64_t[::1] rows = rows_arr
    cdef int64_t[::1] cols = cols_arr
    cdef double complex[::1] vals = vals_arr

    for j in range(n_mono):
        for i in range(dim):
            sign = _act(cfg[i], qf, qo[j], qo[j + 1], pf, po[j], po[j + 1], &new_word)
            if sign == 0:
                continue
            tgt = _find(cfg, new_word)
            if tgt < 0:
                continue
            if n == cap:
                cap *= 2
                rows_arr = np.resize(rows_arr, cap)
                cols_arr = np.resize(cols_arr, cap)
                vals_arr = np.resize(vals_arr, cap)
                rows = rows_arr
                cols = cols_arr
                vals = vals_arr
            rows[n] = tgt
            cols[n] = i
            vals[n] = sign * val[j]
            n += 1
    return rows_arr[:n].copy(), cols_arr[:n].copy(), vals_arr[:n].copy()


def apply_monomials(configs, q_flat, q_off, p_flat, p_off, values, vec):
    cdef const uint64_t[::1] cfg = np.ascontiguousarray(configs, dtype=np.uint64)
    cdef const int32_t[::1] qf = np.ascontiguousarray(q_flat, dtype=np.int32)
    cdef const int64_t[::1] qo = np.ascontiguousarray(q_off, dtype=np.int64)
    cdef const int32_t[::1] pf = np.ascontiguousarray(p_flat, dtype=np.int32)
    cdef const int64_t[::1] po = np.ascontiguousarray(p_off, dtype=np.int64)
    cdef const double complex[::1] val = np.ascontiguousarray(values, dtype=np.complex128)
    cdef const double complex[::1] x = np.ascontiguousarray(vec, dtype=np.complex128)
    cdef int64_t dim = cfg.shape[0], n_mono = val.shape[0], i, j, tgt
    cdef int sign
    cdef uint64_t new_word

    out_arr = np.zeros(dim, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    with nogil:
        for j in range(n_mono):
            for i in range(dim):
                if x[i] == 0:
                    continue
                sign = _act(cfg[i], qf, qo[j], qo[j + 1], pf, po[j], po[j + 1], &new_word)
                if sign == 0:
                    continue
                tgt = _find(cfg, new_word)
                if tgt >= 0:
                    out[tgt] = out[tgt] + sign * val[j] * x[i]
    return out_arr
