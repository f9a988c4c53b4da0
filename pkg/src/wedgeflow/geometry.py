"""Wedge geometry: faces, normals, pushing directions, and angle bookkeeping.

Coordinate convention: the wedge is S = {x : 0 <= arg(x) <= xi}. Face F1
lies on the positive x-axis, face F2 on the ray at angle ``xi``. The inward
unit normals are n1 = (0, 1) and n2 = (sin xi, -cos xi). The pushing
directions v1, v2 point at angles ``delta`` (from F1) and ``xi - epsilon``
(from F2) and are normalised so <v_i, n_i> = 1, which forces
||v1|| = 1/sin(delta) and ||v2|| = 1/sin(epsilon).

All angles are stored in radians as doubles. Rotation/reflection matrices
are recomputed from their angles on demand rather than by accumulating
matrix products, so repeated composition does not drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, DegeneratePushingError

__all__ = [
    "LabelMatrix",
    "WedgeGeometry",
    "Drift",
    "Admissibility",
    "make_wedge",
    "unit_vector",
    "anticlockwise_rotation",
    "anticlockwise_reflection",
    "clockwise_rotation",
    "clockwise_reflection",
    "exponential_order",
    "drift_admissible",
]

TWO_PI = 2.0 * math.pi

#: default absolute tolerance for angle comparisons (radians)
ANGLE_TOL = 1e-9


def unit_vector(theta: float) -> np.ndarray:
    """The unit vector (cos theta, sin theta)."""
    return np.array([math.cos(theta), math.sin(theta)])


E1 = np.array([1.0, 0.0])


def _wrap(angle: float, period: float) -> float:
    """Reduce ``angle`` into [0, period)."""
    a = math.fmod(angle, period)
    return a + period if a < 0 else a


@dataclass(frozen=True)
class LabelMatrix:
    """A 2x2 rotation or reflection, identified by kind and angle.

    ``rotation(theta)`` is the rotation over ``theta``; ``reflection(theta)``
    is the reflection across the line with argument ``theta``. Rotations are
    equal modulo 2*pi, reflections modulo pi.
    """

    kind: str  # "rotation" | "reflection"
    angle: float

    @staticmethod
    def rotation(theta: float) -> "LabelMatrix":
        return LabelMatrix("rotation", theta)

    @staticmethod
    def reflection(theta: float) -> "LabelMatrix":
        return LabelMatrix("reflection", theta)

    @staticmethod
    def identity() -> "LabelMatrix":
        return LabelMatrix("rotation", 0.0)

    @property
    def matrix(self) -> np.ndarray:
        if self.kind == "rotation":
            c, s = math.cos(self.angle), math.sin(self.angle)
            return np.array([[c, -s], [s, c]])
        c, s = math.cos(2.0 * self.angle), math.sin(2.0 * self.angle)
        return np.array([[c, s], [s, -c]])

    @property
    def sign(self) -> int:
        """Determinant sign: +1 for rotations, -1 for reflections."""
        return 1 if self.kind == "rotation" else -1

    def canonical_angle(self) -> float:
        """Angle reduced to [0, 2*pi) for rotations, [0, pi) for reflections."""
        return _wrap(self.angle, TWO_PI if self.kind == "rotation" else math.pi)

    def __matmul__(self, other: "LabelMatrix") -> "LabelMatrix":
        # Compose by angle arithmetic; exact in the angle parametrisation.
        if self.kind == "rotation" and other.kind == "rotation":
            return LabelMatrix.rotation(self.angle + other.angle)
        if self.kind == "rotation":  # rho_t R_a = R_{a + t/2}
            return LabelMatrix.reflection(other.angle + 0.5 * self.angle)
        if other.kind == "rotation":  # R_a rho_t = R_{a - t/2}
            return LabelMatrix.reflection(self.angle - 0.5 * other.angle)
        # R_a R_b = rho_{2(a-b)}
        return LabelMatrix.rotation(2.0 * (self.angle - other.angle))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def isclose(self, other: "LabelMatrix", tol: float = ANGLE_TOL) -> bool:
        if self.kind != other.kind:
            return False
        period = TWO_PI if self.kind == "rotation" else math.pi
        diff = _wrap(self.angle - other.angle, period)
        return diff <= tol or period - diff <= tol


@dataclass(frozen=True)
class WedgeGeometry:
    """The wedge S with its faces, normals, pushing vectors and derived angles."""

    xi: float
    delta: float
    epsilon: float
    n1: np.ndarray = field(repr=False)
    n2: np.ndarray = field(repr=False)
    v1: np.ndarray = field(repr=False)
    v2: np.ndarray = field(repr=False)
    alpha: float

    @property
    def e1(self) -> np.ndarray:
        return E1

    def w(self, theta: float) -> np.ndarray:
        return unit_vector(theta)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x @ self.n1 >= -tol and x @ self.n2 >= -tol)


def make_wedge(xi: float, delta: float, epsilon: float) -> WedgeGeometry:
    """Build a `WedgeGeometry`, validating the angle ranges.

    Raises `DomainError` if any angle leaves (0, pi) and
    `DegeneratePushingError` if sin(delta) or sin(epsilon) is below 1e-12
    (the pushing normalisation <v_i, n_i> = 1 would blow up).
    """
    for name, val in (("xi", xi), ("delta", delta), ("epsilon", epsilon)):
        if not (0.0 < val < math.pi):
            raise DomainError(f"{name}={val!r} must lie strictly between 0 and pi")
    if math.sin(delta) < 1e-12 or math.sin(epsilon) < 1e-12:
        raise DegeneratePushingError("sin(delta) or sin(epsilon) below 1e-12")
    n1 = np.array([0.0, 1.0])
    n2 = np.array([math.sin(xi), -math.cos(xi)])
    v1 = unit_vector(delta) / math.sin(delta)
    v2 = unit_vector(xi - epsilon) / math.sin(epsilon)
    alpha = (delta + epsilon - math.pi) / xi
    return WedgeGeometry(xi=xi, delta=delta, epsilon=epsilon, n1=n1, n2=n2, v1=v1, v2=v2, alpha=alpha)


@dataclass(frozen=True)
class Drift:
    """A nonzero drift vector together with its argument."""

    mu: np.ndarray
    theta_mu: float

    @staticmethod
    def of(mu) -> "Drift":
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (2,):
            raise DomainError("drift must be a 2-vector")
        norm = math.hypot(mu[0], mu[1])
        if not norm > 0.0 or not np.isfinite(norm):
            raise DomainError("drift must be nonzero and finite")
        return Drift(mu=mu, theta_mu=math.atan2(mu[1], mu[0]))

    @staticmethod
    def from_angle(theta: float, norm: float = 1.0) -> "Drift":
        if norm <= 0.0:
            raise DomainError("drift norm must be positive")
        return Drift.of(norm * unit_vector(theta))

    @property
    def norm(self) -> float:
        return math.hypot(self.mu[0], self.mu[1])

    def unit(self) -> "Drift":
        return Drift.of(self.mu / self.norm)


def anticlockwise_rotation(g: WedgeGeometry, k: int) -> LabelMatrix:
    """Rotation label of the k-th anticlockwise copy of the initial wedge."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    return LabelMatrix.rotation(2.0 * g.delta + 2.0 * k * g.xi)


def anticlockwise_reflection(g: WedgeGeometry, k: int) -> LabelMatrix:
    """Reflection label preceding the k-th anticlockwise rotation.

    Equals rotation(2*delta + 2*(k-1)*xi) composed with the reflection across
    F2, i.e. the reflection across the line at angle delta + k*xi.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    return LabelMatrix.reflection(g.delta + k * g.xi)


def clockwise_rotation(g: WedgeGeometry, k: int) -> LabelMatrix:
    """Rotation label of the k-th clockwise copy (mirror-image construction)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    return LabelMatrix.rotation(-2.0 * k * g.xi - 2.0 * g.epsilon)


def clockwise_reflection(g: WedgeGeometry, k: int) -> LabelMatrix:
    """Reflection label preceding the k-th clockwise rotation;
    rotation(-2*(k-1)*xi - 2*epsilon) composed with the reflection across F1."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    return LabelMatrix.reflection(-g.epsilon - (k - 1) * g.xi)


def exponential_order(g: WedgeGeometry, tol: float = ANGLE_TOL) -> int | None:
    """The nonnegative integer ell with alpha = -ell, if one exists within tol.

    Returns None when -alpha is not close to a nonnegative integer; that is
    exactly the regime with no finite sum-of-exponentials stationary density.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    ell = round(-g.alpha)
    if ell >= 0 and abs(g.alpha + ell) <= tol:
        return ell
    return None


class Admissibility(enum.Enum):
    UNSTABLE = "unstable"
    STABLE_ONLY = "stable_only"
    IN_THETA_ELL = "in_theta_ell"


def drift_admissible(g: WedgeGeometry, d: Drift, ell: int, tol: float = ANGLE_TOL) -> Admissibility:
    """Classify a drift against the stability cone and the degeneracy-free set.

    UNSTABLE unless xi - epsilon < theta_mu < delta. Given stability,
    IN_THETA_ELL additionally requires |sin(theta_mu - 2*delta - k*xi)| > tol
    for every k = 0..2*ell; otherwise STABLE_ONLY.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    th = d.theta_mu
    if not (g.xi - g.epsilon < th < g.delta):
        return Admissibility.UNSTABLE
    for k in range(2 * ell + 1):
        if abs(math.sin(th - 2.0 * g.delta - k * g.xi)) <= tol:
            return Admissibility.STABLE_ONLY
    return Admissibility.IN_THETA_ELL
