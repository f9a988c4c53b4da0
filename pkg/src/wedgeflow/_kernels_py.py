"""Pure-numpy Monte Carlo kernels (fallback backend).

These mirror the compiled kernels in `_kernels.pyx` operation for operation:
every floating-point expression appears in the same order with the same
correctly-rounded primitives (+, *, /, sqrt), so path trajectories and
histogram counts are bit-identical across backends. The survival kernel
additionally calls exp(), whose last-ulp rounding may differ between numpy
and libm, so survival results are compared with a tolerance instead.
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def _sector_bins(x0, x1, bs_cos, bs_sin, nth):
    """Angular bin via binary search over the sector boundary table.

    Returns clamp(first_neg - 1, 0, nth - 1) where first_neg is the smallest
    boundary index whose cross product with (x0, x1) is negative.
    """
    n = x0.shape[0]
    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, nth + 1, dtype=np.int64)
    while True:
        open_ = lo < hi
        if not open_.any():
            break
        mid = (lo + hi) >> 1
        midc = np.where(open_, mid, 0)  # finished lanes would index out of range
        cross = bs_cos[midc] * x1 - bs_sin[midc] * x0
        neg = cross < 0.0
        hi = np.where(open_ & neg, mid, hi)
        lo = np.where(open_ & ~neg, mid + 1, lo)
    return np.clip(lo - 1, 0, nth - 1)


def srbm_chunk(
    x,
    z,
    drift0,
    drift1,
    sqdt,
    n1x,
    n1y,
    v1x,
    v1y,
    n2x,
    n2y,
    v2x,
    v2y,
    bs_cos,
    bs_sin,
    inv_dr,
    nth,
    nr,
    counts,
    overflow,
    record_offset,
    max_push,
    vertex_tol,
):
    """Advance all paths through one chunk of Euler steps with boundary pushing.

    x: (P, 2) states, updated in place. z: (P, S, 2) standard normals.
    counts: (P, nth*nr) int32 per-path bin counts; overflow: (P,) int64.
    Steps with index >= record_offset (chunk-local) are recorded post-push.
    Returns (vertex_projections, finite).
    """
    paths, steps = z.shape[0], z.shape[1]
    x0 = x[:, 0]
    x1 = x[:, 1]
    nvertex = 0
    for s in range(steps):
        x0 += drift0 + sqdt * z[:, s, 0]
        x1 += drift1 + sqdt * z[:, s, 1]
        # minimal pushing along v1/v2; a handful of iterations suffices away
        # from the vertex, the remainder is projected onto it
        idx = None
        for _ in range(max_push):
            if idx is None:
                s1 = x0 * n1x + x1 * n1y
                m1 = s1 < 0.0
                if m1.any():
                    t = -s1[m1]
                    x0[m1] += t * v1x
                    x1[m1] += t * v1y
                s2 = x0 * n2x + x1 * n2y
                m2 = s2 < 0.0
                if m2.any():
                    t = -s2[m2]
                    x0[m2] += t * v2x
                    x1[m2] += t * v2y
                if not (m1.any() or m2.any()):
                    idx = np.empty(0, dtype=np.int64)
                    break
                idx = np.nonzero(m1 | m2)[0]
            else:
                if idx.size == 0:
                    break
                a0 = x0[idx]
                a1 = x1[idx]
                s1 = a0 * n1x + a1 * n1y
                m1 = s1 < 0.0
                if m1.any():
                    t = -s1[m1]
                    a0[m1] += t * v1x
                    a1[m1] += t * v1y
                s2 = a0 * n2x + a1 * n2y
                m2 = s2 < 0.0
                if m2.any():
                    t = -s2[m2]
                    a0[m2] += t * v2x
                    a1[m2] += t * v2y
                x0[idx] = a0
                x1[idx] = a1
                if not (m1.any() or m2.any()):
                    break
                idx = idx[m1 | m2]
        if idx is not None and idx.size:
            s1 = x0[idx] * n1x + x1[idx] * n1y
            s2 = x0[idx] * n2x + x1[idx] * n2y
            bad = idx[(s1 < -vertex_tol) | (s2 < -vertex_tol)]
            if bad.size:
                x0[bad] = 0.0
                x1[bad] = 0.0
                nvertex += bad.size
        if s >= record_offset:
            r = np.sqrt(x0 * x0 + x1 * x1)
            ir = (r * inv_dr).astype(np.int64)
            ok = ir < nr
            it = _sector_bins(x0[ok], x1[ok], bs_cos, bs_sin, nth)
            flat = counts.reshape(-1)
            flat[np.nonzero(ok)[0] * (nth * nr) + (it * nr + ir[ok])] += 1
            overflow[~ok] += 1
    finite = bool(np.isfinite(x0).all() and np.isfinite(x1).all())
    return nvertex, finite


def survival_chunk(
    y,
    z,
    u,
    active,
    death_step,
    d1,
    d2,
    drift0,
    drift1,
    sqdt,
    n1x,
    n1y,
    n2x,
    n2y,
    neg_two_over_dt,
    safe1,
    safe2,
    use_bridge,
    step_offset,
    idx,
):
    """Advance free-motion paths, killing on exit (with optional Brownian-bridge
    crossing correction) and retiring paths beyond the safety distances.

    idx maps rows of z/u to path indices; all rows start active.
    active: (P,) int8, 1 while undecided, 0 dead, 2 safe. death_step records
    the global step of death (-1 = never died). d1/d2 carry the previous
    face distances across chunk boundaries.
    """
    steps = z.shape[1]
    rows = np.arange(idx.shape[0], dtype=np.int64)
    for s in range(steps):
        if rows.size == 0:
            break
        p = idx[rows]
        y0 = y[p, 0] + (drift0 + sqdt * z[rows, s, 0])
        y1 = y[p, 1] + (drift1 + sqdt * z[rows, s, 1])
        y[p, 0] = y0
        y[p, 1] = y1
        s1n = y0 * n1x + y1 * n1y
        s2n = y0 * n2x + y1 * n2y
        dead = (s1n <= 0.0) | (s2n <= 0.0)
        if use_bridge:
            # clamp only affects already-dead entries (alive ones have arg < 0)
            p1 = np.exp(np.minimum(neg_two_over_dt * (d1[p] * s1n), 0.0))
            p2 = np.exp(np.minimum(neg_two_over_dt * (d2[p] * s2n), 0.0))
            pkill = p1 + p2 - p1 * p2
            dead |= u[rows, s] < pkill
        newly_dead = p[dead]
        if newly_dead.size:
            active[newly_dead] = 0
            death_step[newly_dead] = step_offset + s
        safe = (~dead) & (s1n >= safe1) & (s2n >= safe2)
        newly_safe = p[safe]
        if newly_safe.size:
            active[newly_safe] = 2
        d1[p] = s1n
        d2[p] = s2n
        rows = rows[~(dead | safe)]
