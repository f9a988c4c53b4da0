"""Special-function machinery for the corner expansion and the sign lemma.

Everything here works with the drift scaled to unit norm: the small-radius
expansion of a building block in modified Bessel functions,

    exp(<mu, x>) * block_j(x) = I_0(r) + (2/sin delta) * sum_n h_{j,n}(theta) I_n(r),

its angular coefficients h_{j,n} written in Chebyshev polynomials of the
second kind, and the (ell+1) x (ell+1) coefficient determinant whose
vanishing for n < ell gives the r^ell corner behaviour. Bessel values come
from the power series (fixed 60-term cap, early exit at relative 1e-15),
which is ample at the desk scales r <= 10 used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import density_expanded, evaluate
from .errors import DomainError, EvaluationAtNodeError
from .geometry import Drift, WedgeGeometry, exponential_order

__all__ = [
    "cheb_T",
    "cheb_U",
    "bessel_I",
    "SpectralContext",
    "corner_limit",
    "CornerFit",
    "default_corner_radii",
    "exp_vandermonde_det",
]


def cheb_T(n: int, x: float) -> float:
    """Chebyshev polynomial of the first kind by the three-term recurrence."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 1.0
    prev, cur = 1.0, float(x)
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur


def cheb_U(n: int, x: float) -> float:
    """Chebyshev polynomial of the second kind; U_{-1} = 0 by convention."""
    if n < -1:
        raise DomainError("n must be >= -1")
    if n == -1:
        return 0.0
    if n == 0:
        return 1.0
    prev, cur = 1.0, 2.0 * float(x)
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur


def bessel_I(n: int, r: float) -> float:
    """Modified Bessel function of the first kind, integer order, r >= 0.

    Power series truncated at 60 terms with early exit at relative 1e-15.
    """
    if n < 0:
        raise DomainError("order must be nonnegative")
    if r < 0.0:
        raise DomainError("argument must be nonnegative")
    half = 0.5 * r
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    total = term
    if term == 0.0:
        return 0.0
    for t in range(1, 60):
        term *= half * half / (t * (n + t))
        total += term
        if abs(term) <= 1e-15 * abs(total):
            break
    return total


@dataclass(frozen=True)
class SpectralContext:
    """Per-problem angles and Vandermonde variables for the corner expansion.

    The drift is pre-scaled to unit norm; `omega(k)` is the drift angle
    shifted by the k-th construction angle and `zeta(j) = cos(omega(2j))` is
    the Vandermonde variable of the j-th column.
    """

    geometry: WedgeGeometry
    drift: Drift  # unit norm
    ell: int

    @staticmethod
    def create(g: WedgeGeometry, d: Drift, ell: int | None = None) -> "SpectralContext":
        if ell is None:
            ell = exponential_order(g)
            if ell is None:
                raise DomainError("geometry has no integer order; pass ell explicitly")
        return SpectralContext(geometry=g, drift=d.unit(), ell=ell)

    def omega(self, k: int) -> float:
        return self.drift.theta_mu - 2.0 * self.geometry.delta - k * self.geometry.xi

    def zeta(self, j: int) -> float:
        return math.cos(self.omega(2 * j))

    def zetas(self) -> list[float]:
        return [self.zeta(j) for j in range(self.ell + 1)]

    def block_harmonic(self, j: int, n: int, theta: float) -> float:
        """Angular coefficient h_{j,n}(theta) of I_n in the block expansion."""
        if n < 1:
            raise DomainError("n must be >= 1")
        g = self.geometry
        c = self.zeta(j)
        mu_v1 = float(self.drift.mu @ (g.v1 / np.linalg.norm(g.v1)))
        return (
            0.5 * math.sin(n * theta + g.delta) * cheb_U(n, c)
            - mu_v1 * math.sin(n * theta) * cheb_U(n - 1, c)
            + 0.5 * math.sin(n * theta - g.delta) * cheb_U(n - 2, c)
        )

    def block_expansion(self, j: int, r: float, theta: float, nmax: int = 40) -> float:
        """exp(<mu, x>) * block_j(x) at x = r*w(theta), via the Bessel series."""
        total = bessel_I(0, r)
        scale = 2.0 / math.sin(self.geometry.delta)
        for n in range(1, nmax + 1):
            total += scale * self.block_harmonic(j, n, theta) * bessel_I(n, r)
        return total

    def corner_coefficient(self, n: int, theta: float) -> float:
        """Coefficient determinant of I_n: first row h_{j,n}(theta), lower rows
        U_m(zeta_j) for m = ell-1 down to 0. Vanishes for n < ell; proportional
        to sin(ell*theta + delta) at n = ell."""
        ell = self.ell
        zs = self.zetas()
        m = np.empty((ell + 1, ell + 1))
        m[0] = [self.block_harmonic(j, n, theta) for j in range(ell + 1)]
        for i, order in enumerate(range(ell - 1, -1, -1), start=1):
            m[i] = [cheb_U(order, z) for z in zs]
        if ell == 0:
            return float(m[0, 0])
        return float(np.linalg.det(m))

    def corner_coefficient_power_rows(self, n: int, theta: float) -> float:
        """Same determinant with raw powers zeta^m instead of U_m rows; used to
        check that the row replacement preserves the zero/nonzero pattern."""
        ell = self.ell
        zs = self.zetas()
        m = np.empty((ell + 1, ell + 1))
        m[0] = [self.block_harmonic(j, n, theta) for j in range(ell + 1)]
        for i, order in enumerate(range(ell - 1, -1, -1), start=1):
            m[i] = [z**order for z in zs]
        if ell == 0:
            return float(m[0, 0])
        return float(np.linalg.det(m))


def default_corner_radii(rmax: float = 5e-2, rmin: float = 1e-3, count: int = 9) -> np.ndarray:
    """Geometric radius ladder for corner fits, largest first."""
    return np.geomspace(rmax, rmin, count)


@dataclass(frozen=True)
class CornerFit:
    """Log-log fit of the density along a ray into the corner."""

    slope: float
    intercept: float
    c_estimate: float


def corner_limit(g: WedgeGeometry, d: Drift, theta: float, radii=None) -> CornerFit:
    """Fit the corner power law of the density along the ray at ``theta``.

    Least squares of log|p(r w_theta)| against log r gives the slope (the
    expected value is ell); the limit constant is estimated at the smallest
    radius as p / (r^ell sin(ell*theta + delta)). Requesting an angle where
    sin(ell*theta + delta) vanishes raises `EvaluationAtNodeError`.
    """
    if radii is None:
        radii = default_corner_radii()
    radii = np.asarray(radii, dtype=float)
    if radii.min() <= 0.0:
        raise DomainError("radii must be positive")
    ell = exponential_order(g)
    if ell is None:
        raise DomainError("geometry has no integer order")
    profile = math.sin(ell * theta + g.delta)
    if abs(profile) < 1e-9:
        raise EvaluationAtNodeError(f"sin(ell*theta + delta) = {profile:.3e} at theta = {theta}")
    sum_ = density_expanded(g, d)
    pts = np.stack([radii * math.cos(theta), radii * math.sin(theta)], axis=1)
    vals = evaluate(sum_, pts)
    if np.any(vals == 0.0):
        raise EvaluationAtNodeError("density vanished on the requested ray")
    logs = np.log(np.abs(vals))
    slope, intercept = np.polyfit(np.log(radii), logs, 1)
    i = int(np.argmin(radii))
    c = vals[i] / (radii[i] ** ell * profile)
    return CornerFit(slope=float(slope), intercept=float(intercept), c_estimate=float(c))


def exp_vandermonde_det(zeta, y: float) -> float:
    """Determinant with first row exp(zeta_j * y) over a Vandermonde body.

    Rows below the exponential row are zeta^m for m = ell-1 down to 1 and a
    final row of ones. For y > 0 its sign equals the sign of
    prod_{i<j} (zeta_i - zeta_j); exact ties give zero on both sides.
    """
    if y <= 0.0:
        raise DomainError("y must be positive")
    zeta = np.asarray(zeta, dtype=float)
    n = zeta.size
    if n < 1:
        raise DomainError("zeta must be nonempty")
    m = np.empty((n, n))
    m[0] = np.exp(zeta * y)
    for i, power in enumerate(range(n - 2, -1, -1), start=1):
        m[i] = zeta**power
    if n == 1:
        return float(m[0, 0])
    return float(np.linalg.det(m))
