# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric core. Mirrors ``_pykernels`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


cdef inline double _power(double x, double beta, int ib, bint integral) nogil:
    cdef double out = 1.0
    cdef int i
    if integral:
        for i in range(ib):
            out = out * x
        return out
    return pow(x, beta)


cdef inline bint _is_integral(double beta, int *ib):
    ib[0] = <int>beta
    return ib[0] == beta and 0 <= ib[0] <= 16


def bpr(const double[:] tff, const double[:] cap, flow, double lam, double beta):
    cdef const double[:] f = np.ascontiguousarray(flow, dtype=np.float64)
    cdef Py_ssize_t n = tff.shape[0], e
    cdef int ib
    cdef bint integral = _is_integral(beta, &ib)
    out = np.empty(n)
    cdef double[:] o = out
    for e in range(n):
        o[e] = tff[e] * (1.0 + lam * _power(f[e] / cap[e], beta, ib, integral))
    return out


def route_table(const double[:] tff, const double[:] cap, flow, double lam, double beta,
                const long[:] ptr, const long[:] idx):
    cdef const double[:] f = np.ascontiguousarray(flow, dtype=np.float64)
    cdef Py_ssize_t n_edges = tff.shape[0], n_routes = ptr.shape[0] - 1, e, r, k
    cdef int ib
    cdef bint integral = _is_integral(beta, &ib)
    cdef double base = 0.0, s, d
    t0_arr = np.empty(n_edges)
    t1_arr = np.empty(n_edges)
    cdef double[:] t0 = t0_arr
    cdef double[:] t1 = t1_arr
    for e in range(n_edges):
        t0[e] = tff[e] * (1.0 + lam * _power(f[e] / cap[e], beta, ib, integral))
        t1[e] = tff[e] * (1.0 + lam * _power((f[e] + 1.0) / cap[e], beta, ib, integral))
        base += t0[e]
    times_arr = np.empty(n_routes)
    wd_arr = np.empty(n_routes)
    cdef double[:] times = times_arr
    cdef double[:] wd = wd_arr
    for r in range(n_routes):
        s = 0.0
        d = 0.0
        for k in range(ptr[r], ptr[r + 1]):
            e = idx[k]
            s += t0[e]
            d += t1[e] - t0[e]
        times[r] = s
        wd[r] = base + d
    return times_arr, wd_arr, base


def sample_block(Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t g, const double[:] uniforms, Py_ssize_t pos):
    cdef Py_ssize_t n = hi - lo, i, j, tmp
    if g >= n:
        return list(range(lo, hi)), pos
    pool_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[:] pool = pool_arr
    for i in range(g):
        j = i + <Py_ssize_t>(uniforms[pos + i] * (n - i))
        if j >= n:
            j = n - 1
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    chosen = sorted(pool_arr[:g].tolist())
    return [lo + c for c in chosen], pos + g


def sampled_summary(const double[:] costs, const long[:] finals, Py_ssize_t lo, Py_ssize_t hi,
                    Py_ssize_t g, const double[:] uniforms, Py_ssize_t pos):
    cdef Py_ssize_t n = hi - lo, i, j, tmp, o, best = -1, m
    cdef double total = 0.0, c, best_cost = 0.0
    cdef Py_ssize_t pool[512]
    if g >= n:
        for o in range(lo, hi):
            c = costs[o]
            total += c
            if best < 0 or c < best_cost or (c == best_cost and finals[o] < finals[best]):
                best = o
                best_cost = c
        return total / n, best, pos
    if n > 512:
        # large blocks fall back to the list-based sampler
        picked, pos = sample_block(lo, hi, g, uniforms, pos)
        for o in picked:
            c = costs[o]
            total += c
            if best < 0 or c < best_cost or (c == best_cost and finals[o] < finals[best]):
                best = o
                best_cost = c
        return total / len(picked), best, pos
    for i in range(n):
        pool[i] = i
    for i in range(g):
        j = i + <Py_ssize_t>(uniforms[pos + i] * (n - i))
        if j >= n:
            j = n - 1
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    # insertion sort of the chosen prefix keeps the summation order canonical
    for i in range(1, g):
        tmp = pool[i]
        j = i - 1
        while j >= 0 and pool[j] > tmp:
            pool[j + 1] = pool[j]
            j -= 1
        pool[j + 1] = tmp
    for m in range(g):
        o = lo + pool[m]
        c = costs[o]
        total += c
        if best < 0 or c < best_cost or (c == best_cost and finals[o] < finals[best]):
            best = o
            best_cost = c
    return total / g, best, pos + g
