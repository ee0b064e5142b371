# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, cos, sin, M_PI
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef int64_t NONE = -1


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double to_unit(uint64_t z) noexcept nogil:
    cdef double u = (<double>(z >> 11) + 0.5) * (1.0 / 9007199254740992.0)
    return u if u < 1.0 else 1.0 - 1.1102230246251565e-16


cdef int64_t walk(const double[:, ::1] cum, const double[::1] exit_rate, int64_t s,
                  double horizon, uint64_t st, double* tout, int64_t* sout) noexcept nogil:
    cdef int64_t count = 0, v, S = cum.shape[1]
    cdef double t = 0.0, u, rate
    while True:
        rate = exit_rate[s]
        if rate <= 0:
            break
        st += GAMMA
        u = to_unit(mix64(st))
        t += -log(u) / rate
        if not (t <= horizon):
            break
        st += GAMMA
        u = to_unit(mix64(st))
        v = 0
        while v < S - 1 and not (u < cum[s, v]):
            v += 1
        s = v
        if tout != NULL:
            tout[count] = t
            sout[count] = s
        count += 1
    return count


def simulate_chains(cum, exit_rate, initial, double horizon, seeds):
    cdef const double[:, ::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const double[::1] er = np.ascontiguousarray(exit_rate, dtype=np.float64)
    cdef const uint64_t[::1] sd = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef Py_ssize_t n = sd.shape[0], p
    cdef const int64_t[::1] init = np.ascontiguousarray(
        np.broadcast_to(np.asarray(initial, dtype=np.int64), (n,)))
    offsets_a = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] off = offsets_a
    with nogil:
        for p in range(n):
            off[p + 1] = off[p] + walk(c, er, init[p], horizon, sd[p], NULL, NULL)
    times_a = np.empty(off[n], dtype=np.float64)
    states_a = np.empty(off[n], dtype=np.int64)
    cdef double[::1] tv = times_a
    cdef int64_t[::1] sv = states_a
    cdef double* tp = &tv[0] if off[n] > 0 else NULL
    cdef int64_t* sp = &sv[0] if off[n] > 0 else NULL
    if off[n] > 0:
        with nogil:
            for p in range(n):
                walk(c, er, init[p], horizon, sd[p], tp + off[p], sp + off[p])
    return offsets_a, times_a, states_a


def ou_paths(seeds, decay, shift, sdev, double r0):
    cdef const uint64_t[::1] sd = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef const double[::1] a = np.ascontiguousarray(decay, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(shift, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(sdev, dtype=np.float64)
    cdef Py_ssize_t n = sd.shape[0], steps = a.shape[0], p, k
    out = np.empty((n, steps + 1), dtype=np.float64)
    cdef double[:, ::1] r = out
    cdef uint64_t st
    cdef double u1, u2, rad, ang, z, spare = 0.0
    with nogil:
        for p in range(n):
            st = sd[p]
            r[p, 0] = r0
            for k in range(steps):
                if k % 2 == 0:
                    st += GAMMA
                    u1 = to_unit(mix64(st))
                    st += GAMMA
                    u2 = to_unit(mix64(st))
                    rad = sqrt(-2.0 * log(u1))
                    ang = 2.0 * M_PI * u2
                    z = rad * cos(ang)
                    spare = rad * sin(ang)
                else:
                    z = spare
                r[p, k + 1] = r[p, k] * a[k] + b[k] + s[k] * z
    return out


def first_passage(offsets, states, int K, int n_components, int component):
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const int64_t[::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef Py_ssize_t n = off.shape[0] - 1, p, e
    cdef int64_t div = 1, val, L
    cdef int i
    for i in range(n_components - 1 - component):
        div *= K
    ge_a = np.full((n, K + 1), NONE, dtype=np.int64)
    band_a = np.full((n, K + 1), NONE, dtype=np.int64)
    cdef int64_t[:, ::1] ge = ge_a
    cdef int64_t[:, ::1] band = band_a
    with nogil:
        for p in range(n):
            for e in range(off[p], off[p + 1]):
                val = (st[e] // div) % K + 1
                for L in range(1, val + 1):
                    if ge[p, L] == NONE:
                        ge[p, L] = e
                    if val < K and band[p, L] == NONE:
                        band[p, L] = e
    return ge_a, band_a


def states_at(offsets, times, states, initial, query):
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] tm = np.ascontiguousarray(times, dtype=np.float64)
    cdef const int64_t[::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef const double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = off.shape[0] - 1, nq = q.shape[0], p, j, e
    cdef const int64_t[::1] init = np.ascontiguousarray(
        np.broadcast_to(np.asarray(initial, dtype=np.int64), (n,)))
    out_a = np.empty((n, nq), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_a
    cdef int64_t cur
    with nogil:
        for p in range(n):
            e = off[p]
            cur = init[p]
            for j in range(nq):
                while e < off[p + 1] and tm[e] <= q[j]:
                    cur = st[e]
                    e += 1
                out[p, j] = cur
    return out_a
