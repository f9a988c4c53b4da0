"""Gauss-Legendre quadrature helpers for polar integrals over the wedge.

Radial integrals of exponential terms are done in closed form per angular
node (int_0^inf e^{-b r} r dr = 1/b^2 and its truncated variants), so only
the angular direction is discretised. Node/weight tables are cached.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_nodes(n: int, a: float, b: float):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def radial_full(beta):
    """int_0^inf e^{-beta r} r dr = 1/beta^2 (beta > 0)."""
    return 1.0 / (beta * beta)


def radial_truncated(beta, rmax):
    """int_0^{rmax} e^{-beta r} r dr for beta > 0."""
    return (1.0 - np.exp(-beta * rmax) * (1.0 + beta * rmax)) / (beta * beta)


def radial_tail(beta, rmin):
    """int_{rmin}^inf e^{-beta r} r dr for beta > 0."""
    return np.exp(-beta * rmin) * (1.0 + beta * rmin) / (beta * beta)
