# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branching-random-walk event loop.

Twin of _mc_fallback.run_trial: identical arithmetic and identical random
number consumption order, so both backends are bit-compatible. Keep in
lockstep with the Python reference when editing.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, log1p

BACKEND_NAME = "compiled"
RNG_BLOCK = 4096

cnp.import_array()


cdef class BlockRng:
    cdef object gen
    cdef double[::1] buf
    cdef Py_ssize_t idx, size

    def __init__(self, gen, Py_ssize_t block=RNG_BLOCK):
        self.gen = gen
        self.size = block
        self.buf = gen.random(block)
        self.idx = 0

    cdef inline double _next(self):
        if self.idx >= self.size:
            self.buf = self.gen.random(self.size)
            self.idx = 0
        cdef double v = self.buf[self.idx]
        self.idx += 1
        return v

    def next(self):
        return self._next()


cdef inline Py_ssize_t _select(const double[::1] cdf, double key):
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= key:
            lo = mid + 1
        else:
            hi = mid
    if lo > cdf.shape[0] - 1:
        lo = cdf.shape[0] - 1
    return lo


def run_trial(
    BlockRng rng,
    double t_max,
    double dtg,
    Py_ssize_t n_grid,
    cnp.ndarray x0,
    cnp.ndarray sources,
    cnp.ndarray offsets,
    cnp.ndarray jump_cdf,
    double r_jump,
    cnp.ndarray branch_counts,
    cnp.ndarray branch_cdf,
    double r_branch,
    long long pop_cap,
    long long box_radius,
    cnp.ndarray out_total,
    cnp.ndarray out_site,
):
    cdef const long long[:, ::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef const long long[:, ::1] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] cdf = np.ascontiguousarray(jump_cdf, dtype=np.float64)
    cdef const double[::1] bcdf = np.ascontiguousarray(branch_cdf, dtype=np.float64)
    cdef const long long[::1] bcounts = np.ascontiguousarray(branch_counts, dtype=np.int64)
    cdef long long[::1] total = out_total
    cdef long long[:, ::1] site = out_site
    cdef const long long[::1] start = np.ascontiguousarray(x0, dtype=np.int64)

    cdef Py_ssize_t d = start.shape[0]
    cdef Py_ssize_t n_src = src.shape[0]
    cdef long long side = 2 * box_radius + 1 if box_radius >= 0 else 0

    # growable depth-first stack
    cdef Py_ssize_t cap = 1024, top = 0
    st_t_arr = np.empty(cap, dtype=np.float64)
    st_x_arr = np.empty((cap, d), dtype=np.int64)
    cdef double[::1] st_t = st_t_arr
    cdef long long[:, ::1] st_x = st_x_arr

    cdef long long x[8]
    cdef double t, u1, u2, dt, t_next, v, r_tot
    cdef long long events = 0, sidx, n_off
    cdef Py_ssize_t j_lo, j_hi, j, k, zi, bi
    cdef bint at_src, horizon, in_box, truncated = False

    st_t[0] = 0.0
    for k in range(d):
        st_x[0, k] = start[k]
    top = 1

    while top > 0:
        top -= 1
        t = st_t[top]
        for k in range(d):
            x[k] = st_x[top, k]
        while True:
            at_src = False
            for j in range(n_src):
                at_src = True
                for k in range(d):
                    if src[j, k] != x[k]:
                        at_src = False
                        break
                if at_src:
                    break
            r_tot = r_jump + r_branch if at_src else r_jump
            u1 = rng._next()
            dt = -log1p(-u1) / r_tot
            t_next = t + dt
            events += 1
            horizon = t_next >= t_max
            j_lo = <Py_ssize_t>ceil(t / dtg)
            if horizon:
                j_hi = n_grid - 1
            else:
                j_hi = <Py_ssize_t>ceil(t_next / dtg) - 1
                if j_hi >= n_grid:
                    j_hi = n_grid - 1
            if j_lo <= j_hi:
                in_box = False
                sidx = 0
                if box_radius >= 0:
                    in_box = True
                    for k in range(d):
                        if x[k] > box_radius or x[k] < -box_radius:
                            in_box = False
                            break
                    if in_box:
                        for k in range(d):
                            sidx = sidx * side + (x[k] + box_radius)
                for j in range(j_lo, j_hi + 1):
                    total[j] += 1
                    if total[j] > pop_cap:
                        return True, events
                    if in_box:
                        site[j, sidx] += 1
            if horizon:
                break
            u2 = rng._next()
            if at_src:
                v = u2 * r_tot
                if v < r_jump:
                    zi = _select(cdf, v)
                    for k in range(d):
                        x[k] += offs[zi, k]
                else:
                    bi = _select(bcdf, v - r_jump)
                    n_off = bcounts[bi]
                    if n_off == 0:
                        break
                    if top + n_off >= cap:
                        cap = 2 * cap + <Py_ssize_t>n_off
                        new_t = np.empty(cap, dtype=np.float64)
                        new_x = np.empty((cap, d), dtype=np.int64)
                        new_t[:top] = st_t_arr[:top]
                        new_x[:top] = st_x_arr[:top]
                        st_t_arr, st_x_arr = new_t, new_x
                        st_t = st_t_arr
                        st_x = st_x_arr
                    for j in range(n_off - 1):
                        st_t[top] = t_next
                        for k in range(d):
                            st_x[top, k] = x[k]
                        top += 1
            else:
                zi = _select(cdf, u2 * r_tot)
                for k in range(d):
                    x[k] += offs[zi, k]
            t = t_next
    return False, events
