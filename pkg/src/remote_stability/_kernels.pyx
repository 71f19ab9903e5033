# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t, int16_t, uint8_t, int32_t

cnp.import_array()

DEF PERSISTENT = 0
DEF ROUND_ROBIN = 1
DEF GREEDY = 2


cdef inline uint64_t _support(const double[::1] row, Py_ssize_t n2) nogil:
    cdef uint64_t s = 0
    cdef Py_ssize_t j
    for j in range(n2):
        if row[j] > 0.0:
            s |= (<uint64_t>1) << j
    return s


def dominance_scan(const double[:, ::1] cands, double[:, ::1] kept, int64_t n_kept,
                   int64_t cap, int64_t[::1] survivors):
    """Append the non-dominated rows of ``cands`` (already in ascending-sum
    order) to ``kept[:n_kept]``.

    A candidate is dropped when some kept row is <= it entrywise. Stops as
    soon as ``n_kept == cap``. Returns ``(n_kept, n_scanned, n_new)``; the
    chunk positions of the new survivors are written to ``survivors``.
    """
    cdef Py_ssize_t k = cands.shape[0]
    cdef Py_ssize_t n2 = cands.shape[1]
    cdef Py_ssize_t i, q, j
    cdef bint use_mask = n2 <= 64
    cdef bint dominated, ok
    cdef int64_t n_new = 0
    cdef uint64_t s
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] masks_arr = np.zeros(max(cap, 1), dtype=np.uint64)
    cdef uint64_t[::1] masks = masks_arr
    with nogil:
        if use_mask:
            for q in range(n_kept):
                masks[q] = _support(kept[q], n2)
        for i in range(k):
            if n_kept >= cap:
                break
            s = _support(cands[i], n2) if use_mask else 0
            dominated = False
            for q in range(n_kept):
                if use_mask and (masks[q] & ~s) != 0:
                    continue
                ok = True
                for j in range(n2):
                    if kept[q, j] > cands[i, j]:
                        ok = False
                        break
                if ok:
                    dominated = True
                    break
            if not dominated:
                for j in range(n2):
                    kept[n_kept, j] = cands[i, j]
                if use_mask:
                    masks[n_kept] = s
                survivors[n_new] = i
                n_new += 1
                n_kept += 1
        else:
            i = k
    return n_kept, i, n_new


cdef inline int64_t _draw(const double[:, ::1] cdf, int64_t row, double u) nogil:
    cdef Py_ssize_t s = cdf.shape[1]
    cdef double x = u * cdf[row, s - 1]
    cdef Py_ssize_t lo = 0, hi = s, mid
    # first j with cdf[row, j] > x
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[row, mid] > x:
            hi = mid
        else:
            lo = mid + 1
    if lo > s - 1:
        lo = s - 1
    return lo


def run_chunk(const double[:, ::1] cdf, const uint8_t[:, ::1] on,
              const int64_t[:, :, ::1] table, const int64_t[:, ::1] freq_rank,
              const double[::1] u, int64_t[::1] aoi, int64_t[::1] ctl,
              const int64_t[::1] aoi_limit, int kind, int current_knowledge,
              int redundant, int record, int32_t[::1] state_log,
              int16_t[:, ::1] nu_log, uint8_t[:, ::1] gamma_log,
              int64_t[::1] cyc_sensor, int64_t[::1] cyc_len):
    """Advance the system ``len(u)`` slots. ``ctl = [prev_state, served, rr_ptr]``.

    Returns ``(slots_done, n_cycles, diverged)``.
    """
    cdef Py_ssize_t horizon = u.shape[0]
    cdef Py_ssize_t n = aoi.shape[0]
    cdef Py_ssize_t m = on.shape[1]
    cdef Py_ssize_t period = table.shape[1]
    cdef Py_ssize_t t, i, r, best
    cdef int64_t prev = ctl[0], served = ctl[1], ptr = ctl[2]
    cdef int64_t cur, idx, f, phase, n_cyc = 0, k_sched
    cdef bint diverged = False, ok
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nu_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hit_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] taken_arr = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] nu = nu_arr
    cdef uint8_t[::1] hit = hit_arr
    cdef uint8_t[::1] taken = taken_arr
    k_sched = n if n < m else m

    with nogil:
        t = 0
        while t < horizon:
            cur = _draw(cdf, prev, u[t])
            idx = cur if current_knowledge else prev
            for i in range(n):
                nu[i] = 0
                hit[i] = 0
            if kind == PERSISTENT:
                phase = aoi[served] % period
                if phase == 0:
                    phase = period
                if redundant:
                    nu[served] = -1
                    for f in range(m):
                        if on[cur, f]:
                            hit[served] = 1
                            break
                else:
                    f = table[served, phase - 1, idx]
                    nu[served] = f
                    hit[served] = on[cur, f - 1]
            elif kind == ROUND_ROBIN:
                for r in range(k_sched):
                    i = (ptr + r) % n
                    nu[i] = r + 1
                    hit[i] = on[cur, r]
                ptr = (ptr + k_sched) % n
            else:
                for i in range(n):
                    taken[i] = 0
                for r in range(k_sched):
                    best = -1
                    for i in range(n):
                        if not taken[i] and (best < 0 or aoi[i] > aoi[best]):
                            best = i
                    taken[best] = 1
                    f = freq_rank[idx, r]
                    nu[best] = f
                    hit[best] = on[cur, f - 1]
            if record:
                state_log[t] = <int32_t>cur
                for i in range(n):
                    nu_log[t, i] = <int16_t>nu[i]
                    gamma_log[t, i] = hit[i]
            for i in range(n):
                if hit[i]:
                    cyc_sensor[n_cyc] = i
                    cyc_len[n_cyc] = aoi[i]
                    n_cyc += 1
                    aoi[i] = 1
                else:
                    aoi[i] += 1
            if kind == PERSISTENT and hit[served]:
                served = (served + 1) % n
            prev = cur
            t += 1
            for i in range(n):
                if aoi[i] > aoi_limit[i]:
                    diverged = True
            if diverged:
                break
    ctl[0] = prev
    ctl[1] = served
    ctl[2] = ptr
    return t, n_cyc, diverged
