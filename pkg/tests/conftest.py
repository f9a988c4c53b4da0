import math

import numpy as np
import pytest

from wedgeflow import Drift, make_wedge, exponential_order

# (xi, delta, epsilon): three geometries per order 0..3
PARAMETER_SETS = [
    (math.pi / 2, math.pi / 2, math.pi / 2),
    (math.pi / 3, 2 * math.pi / 5, 3 * math.pi / 5),
    (3 * math.pi / 4, math.pi / 3, 2 * math.pi / 3),
    (math.pi / 3, math.pi / 3, math.pi / 3),
    (math.pi / 4, 3 * math.pi / 8, 3 * math.pi / 8),
    (math.pi / 5, math.pi / 2, 3 * math.pi / 10),
    (math.pi / 4, math.pi / 4, math.pi / 4),
    (math.pi / 5, 3 * math.pi / 10, 3 * math.pi / 10),
    (math.pi / 6, math.pi / 3, math.pi / 3),
    (math.pi / 5, math.pi / 5, math.pi / 5),
    (math.pi / 6, math.pi / 4, math.pi / 4),
    (math.pi / 8, 5 * math.pi / 16, 5 * math.pi / 16),
]


def admissible_drift(g, ell, seed, margin=0.08, extra_sines=1):
    """A random drift in the stability cone with all degeneracy sines bounded
    away from zero (including the extra index needed by the clockwise form)."""
    rng = np.random.default_rng(seed)
    lo, hi = g.xi - g.epsilon, g.delta
    for _ in range(2000):
        th = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo))
        ks = range(2 * ell + 1 + extra_sines)
        if all(abs(math.sin(th - 2 * g.delta - k * g.xi)) > margin for k in ks):
            return Drift.from_angle(th, rng.uniform(0.6, 1.8))
    raise AssertionError("no admissible drift found; widen the margin or change seed")


@pytest.fixture(scope="session")
def parameter_cases():
    cases = []
    for i, (xi, de, ep) in enumerate(PARAMETER_SETS):
        g = make_wedge(xi, de, ep)
        ell = exponential_order(g)
        assert ell is not None
        cases.append((g, admissible_drift(g, ell, 1000 + i), ell))
    return cases
