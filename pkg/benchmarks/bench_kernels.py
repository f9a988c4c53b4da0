"""Benchmark the compiled Monte Carlo kernels against the numpy fallback.

Runs the reflected-walk and survival workloads on both backends, checks that
the reflected-walk histograms are bit-identical (they share noise streams and
every floating-point operation), and reports timings.

    python3 benchmarks/bench_kernels.py [--paths N] [--steps N]
"""

import argparse
import math
import time

import numpy as np

from wedgeflow import Drift, SimConfig, make_wedge, simulate_srbm, survival_mc
from wedgeflow._backend import have_compiled


def time_call(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=512)
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args()

    if not have_compiled():
        print("compiled kernels not available; build the extension to benchmark both backends")
        return

    g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
    d = Drift.from_angle(math.pi / 6)
    cfg = SimConfig(dt=1e-3, steps=args.steps, paths=args.paths, seed=7,
                    start=(1.0, 0.6), burn_in=args.steps // 2)

    print(f"reflected walk: {args.paths} paths x {cfg.burn_in + cfg.steps} steps")
    (rc, tc) = time_call(lambda: simulate_srbm(g, d, cfg, backend="compiled"))
    (rp, tp) = time_call(lambda: simulate_srbm(g, d, cfg, backend="python"))
    same = np.array_equal(rc.histogram, rp.histogram) and rc.overflow == rp.overflow
    print(f"  compiled {tc:8.3f}s   numpy {tp:8.3f}s   speedup {tp / tc:5.1f}x   "
          f"histograms identical: {same}")

    x = np.array([0.9 * math.cos(0.4), 0.9 * math.sin(0.4)])
    scfg = SimConfig(dt=1e-3, steps=1, paths=max(2000, args.paths * 4), seed=11)
    print(f"survival: {scfg.paths} paths, horizon 30")
    (sc, tc) = time_call(lambda: survival_mc(g, d, x, 30.0, scfg, backend="compiled"))
    (sp, tp) = time_call(lambda: survival_mc(g, d, x, 30.0, scfg, backend="python"))
    print(f"  compiled {tc:8.3f}s   numpy {tp:8.3f}s   speedup {tp / tc:5.1f}x   "
          f"estimates {sc.estimate:.5f} / {sp.estimate:.5f} "
          f"(diff {abs(sc.estimate - sp.estimate):.2e})")


if __name__ == "__main__":
    main()
