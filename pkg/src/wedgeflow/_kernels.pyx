# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo kernels.

Mirrors `_kernels_py` expression for expression; compiled with
-ffp-contract=off so results stay bit-identical to the numpy fallback
(every +, *, /, sqrt is correctly rounded and applied in the same order).
"""

from libc.math cimport sqrt, exp, isfinite

import numpy as np
cimport numpy as cnp

COMPILED = True


def srbm_chunk(
    double[:, ::1] x,
    double[:, :, ::1] z,
    double drift0,
    double drift1,
    double sqdt,
    double n1x,
    double n1y,
    double v1x,
    double v1y,
    double n2x,
    double n2y,
    double v2x,
    double v2y,
    double[::1] bs_cos,
    double[::1] bs_sin,
    double inv_dr,
    int nth,
    int nr,
    int[:, ::1] counts,
    long long[::1] overflow,
    long record_offset,
    int max_push,
    double vertex_tol,
):
    cdef Py_ssize_t paths = z.shape[0]
    cdef Py_ssize_t steps = z.shape[1]
    cdef Py_ssize_t p, s
    cdef int it, nbins = nth * nr
    cdef long nvertex = 0
    cdef bint finite = True
    cdef bint pushed
    cdef double x0, x1, s1, s2, t, r, cross
    cdef long lo, hi, mid, ib, ir

    for p in range(paths):
        x0 = x[p, 0]
        x1 = x[p, 1]
        for s in range(steps):
            x0 = x0 + (drift0 + sqdt * z[p, s, 0])
            x1 = x1 + (drift1 + sqdt * z[p, s, 1])
            for it in range(max_push):
                pushed = False
                s1 = x0 * n1x + x1 * n1y
                if s1 < 0.0:
                    t = -s1
                    x0 = x0 + t * v1x
                    x1 = x1 + t * v1y
                    pushed = True
                s2 = x0 * n2x + x1 * n2y
                if s2 < 0.0:
                    t = -s2
                    x0 = x0 + t * v2x
                    x1 = x1 + t * v2y
                    pushed = True
                if not pushed:
                    break
            if pushed:
                s1 = x0 * n1x + x1 * n1y
                s2 = x0 * n2x + x1 * n2y
                if s1 < -vertex_tol or s2 < -vertex_tol:
                    x0 = 0.0
                    x1 = 0.0
                    nvertex += 1
            if s >= record_offset:
                r = sqrt(x0 * x0 + x1 * x1)
                ir = <long>(r * inv_dr)
                if ir < nr:
                    # smallest boundary index with negative cross product
                    lo = 0
                    hi = nth + 1
                    while lo < hi:
                        mid = (lo + hi) >> 1
                        cross = bs_cos[mid] * x1 - bs_sin[mid] * x0
                        if cross < 0.0:
                            hi = mid
                        else:
                            lo = mid + 1
                    ib = lo - 1
                    if ib < 0:
                        ib = 0
                    elif ib > nth - 1:
                        ib = nth - 1
                    counts[p, ib * nr + ir] += 1
                else:
                    overflow[p] += 1
        x[p, 0] = x0
        x[p, 1] = x1
        if not (isfinite(x0) and isfinite(x1)):
            finite = False
    return nvertex, finite


def survival_chunk(
    double[:, ::1] y,
    double[:, :, ::1] z,
    double[:, ::1] u,
    signed char[::1] active,
    long long[::1] death_step,
    double[::1] d1,
    double[::1] d2,
    double drift0,
    double drift1,
    double sqdt,
    double n1x,
    double n1y,
    double n2x,
    double n2y,
    double neg_two_over_dt,
    double safe1,
    double safe2,
    bint use_bridge,
    long step_offset,
    long long[::1] idx,
):
    cdef Py_ssize_t rows = idx.shape[0]
    cdef Py_ssize_t steps = z.shape[1]
    cdef Py_ssize_t ii, p, s
    cdef double y0, y1, s1n, s2n, p1, p2, pkill
    cdef bint dead

    for ii in range(rows):
        p = idx[ii]
        if active[p] != 1:
            continue
        y0 = y[p, 0]
        y1 = y[p, 1]
        for s in range(steps):
            y0 = y0 + (drift0 + sqdt * z[ii, s, 0])
            y1 = y1 + (drift1 + sqdt * z[ii, s, 1])
            s1n = y0 * n1x + y1 * n1y
            s2n = y0 * n2x + y1 * n2y
            dead = s1n <= 0.0 or s2n <= 0.0
            if use_bridge and not dead:
                p1 = exp(neg_two_over_dt * (d1[p] * s1n))
                p2 = exp(neg_two_over_dt * (d2[p] * s2n))
                pkill = p1 + p2 - p1 * p2
                if u[ii, s] < pkill:
                    dead = True
            d1[p] = s1n
            d2[p] = s2n
            if dead:
                active[p] = 0
                death_step[p] = step_offset + s
                break
            if s1n >= safe1 and s2n >= safe2:
                active[p] = 2
                break
        y[p, 0] = y0
        y[p, 1] = y1
