"""Sum-of-exponential stationary densities on the wedge.

A candidate density is a finite sum of terms a * exp(-<d, x>). Each term
carries the rotation or reflection label M for which <d, x> = <mu, (I-M)x>,
so d = (I - M)^T mu. When -alpha is a nonnegative integer ell the density
has exactly 2*ell + 1 terms, labelled by the alternating sequence of
rotations and reflections produced by the anticlockwise construction; the
same function is also expressible as an (ell+1) x (ell+1) determinant whose
first row contains the two-term building blocks and whose lower rows form a
Vandermonde system in <mu, Rot_k e1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _quad
from .errors import (
    DegenerateDriftError,
    DomainError,
    InvalidDensityError,
    NonIntegrableError,
    NotSumOfExponentialsError,
    UnstableDriftError,
)
from .geometry import (
    ANGLE_TOL,
    Admissibility,
    Drift,
    E1,
    LabelMatrix,
    WedgeGeometry,
    anticlockwise_reflection,
    anticlockwise_rotation,
    drift_admissible,
    exponential_order,
    make_wedge,
    unit_vector,
)

__all__ = [
    "ExponentialTerm",
    "SumOfExponentials",
    "QuadratureSpec",
    "NormalizedDensity",
    "density_block",
    "block_coefficients",
    "coefficient_recursion_residuals",
    "coefficient_recursion_relative",
    "density_expanded",
    "density_determinant",
    "density_clockwise",
    "evaluate",
    "normalize",
    "decay_margin",
    "region_mass_below",
    "tail_mass",
]

#: terms with |coeff| below this fraction of the largest coefficient are pruned
PRUNE_REL = 1e-13

#: exponent vectors closer than this are treated as the same exponential
EXPONENT_SEP = 1e-10

#: exp() arguments are clamped below at this value
EXP_CLAMP = -700.0


@dataclass(frozen=True)
class ExponentialTerm:
    """One term a * exp(-<d, x>) with its rotation/reflection label."""

    coeff: float
    exponent: np.ndarray
    label: LabelMatrix

    def value(self, x) -> float:
        arg = -float(np.asarray(x, dtype=float) @ self.exponent)
        return self.coeff * math.exp(max(arg, EXP_CLAMP))


def _exponent_of(label: LabelMatrix, mu: np.ndarray) -> np.ndarray:
    return (np.eye(2) - label.matrix).T @ mu


@dataclass(frozen=True)
class SumOfExponentials:
    """An ordered, pruned list of exponential terms for a fixed drift/geometry."""

    terms: tuple[ExponentialTerm, ...]
    drift: Drift
    geometry: WedgeGeometry

    @staticmethod
    def from_terms(terms, drift: Drift, geometry: WedgeGeometry) -> "SumOfExponentials":
        """Merge near-identical exponents, prune negligible coefficients."""
        merged: list[list] = []
        for t in terms:
            for m in merged:
                if np.linalg.norm(m[1] - t.exponent) <= EXPONENT_SEP:
                    m[0] += t.coeff
                    break
            else:
                merged.append([t.coeff, np.asarray(t.exponent, dtype=float), t.label])
        cmax = max((abs(m[0]) for m in merged), default=0.0)
        kept = tuple(
            ExponentialTerm(coeff=m[0], exponent=m[1], label=m[2])
            for m in merged
            if abs(m[0]) > PRUNE_REL * cmax
        )
        return SumOfExponentials(terms=kept, drift=drift, geometry=geometry)

    def __len__(self) -> int:
        return len(self.terms)

    def __call__(self, x):
        return evaluate(self, x)

    def scaled(self, s: float) -> "SumOfExponentials":
        return replace(
            self, terms=tuple(replace(t, coeff=s * t.coeff) for t in self.terms)
        )

    def coefficients(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms])

    def exponents(self) -> np.ndarray:
        return np.array([t.exponent for t in self.terms]).reshape(len(self.terms), 2)


def evaluate(sum_: SumOfExponentials, x):
    """Evaluate the sum at a point (2,) or a batch (n, 2) of points.

    Exponent arguments are clamped below at -700 so extreme points underflow
    to zero instead of raising warnings.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 2)
    out = np.zeros(pts.shape[0])
    for t in sum_.terms:
        arg = -(pts @ t.exponent)
        out += t.coeff * np.exp(np.maximum(arg, EXP_CLAMP))
    return float(out[0]) if single else out


def density_block(g: WedgeGeometry, d: Drift, j: int) -> SumOfExponentials:
    """The j-th two-term building block of the anticlockwise construction.

    It is normalised so the coefficients of the rotation and reflection terms
    sum to 1; for j = 0 the reflection term vanishes identically (the
    reflection fixes v1) leaving the single skew-symmetric exponential.
    """
    mu = d.mu
    rot = anticlockwise_rotation(g, j)
    ref = anticlockwise_reflection(g, j)
    a_rot = float(mu @ ((np.eye(2) - rot.matrix) @ g.v1))
    a_ref = float(mu @ ((np.eye(2) - ref.matrix) @ g.v1))
    denom = float(mu @ ((ref.matrix - rot.matrix) @ g.v1))
    if abs(denom) <= 1e-12 * float(mu @ mu):
        raise DegenerateDriftError(
            f"block {j}: vanishing denominator <mu,(Ref-Rot)v1> = {denom:.3e}"
        )
    terms = [
        ExponentialTerm(coeff=a_rot / denom, exponent=_exponent_of(rot, mu), label=rot),
        ExponentialTerm(coeff=-a_ref / denom, exponent=_exponent_of(ref, mu), label=ref),
    ]
    return SumOfExponentials.from_terms(terms, d, g)


def block_coefficients(g: WedgeGeometry, d: Drift, ell: int) -> list[float]:
    """Cofactor coefficients c_k of the expanded density, 0 <= k <= ell.

    c_k = (-1)^k * prod_{0<=i<j<=ell, i,j != k} <mu, (Rot_i - Rot_j) e1>
    divided by <mu, (Ref_k - Rot_k) v1>. An empty product is 1 (the ell = 0
    case). A vanishing denominator means the drift angle violates the
    degeneracy-free condition.
    """
    if ell < 0:
        raise DomainError("ell must be nonnegative")
    mu = d.mu
    rots = [anticlockwise_rotation(g, k) for k in range(ell + 1)]
    refs = [anticlockwise_reflection(g, k) for k in range(ell + 1)]
    zeta = [float(mu @ (r.matrix @ E1)) for r in rots]
    out = []
    for k in range(ell + 1):
        num = 1.0
        for i in range(ell + 1):
            for j in range(i + 1, ell + 1):
                if i != k and j != k:
                    num *= zeta[i] - zeta[j]
        denom = float(mu @ ((refs[k].matrix - rots[k].matrix) @ g.v1))
        if abs(denom) <= 1e-12 * float(mu @ mu):
            raise DegenerateDriftError(
                f"c_{k}: vanishing denominator (drift angle outside the admissible set)"
            )
        out.append(((-1.0) ** k) * num / denom)
    return out


def _recursion_parts(g: WedgeGeometry, d: Drift, c):
    """Left and right products of the coefficient recursion, k = 1..len(c)-1."""
    mu = d.mu
    eye = np.eye(2)
    lhs, rhs = [], []
    for k in range(1, len(c)):
        ref_k = anticlockwise_reflection(g, k).matrix
        rot_km1 = anticlockwise_rotation(g, k - 1).matrix
        lhs.append(c[k] * float(mu @ ((eye - ref_k) @ g.v1)) * float(mu @ ((eye - rot_km1) @ g.v2)))
        rhs.append(c[k - 1] * float(mu @ ((eye - ref_k) @ g.v2)) * float(mu @ ((eye - rot_km1) @ g.v1)))
    return lhs, rhs


def coefficient_recursion_residuals(g: WedgeGeometry, d: Drift, c) -> list[float]:
    """Raw residuals of the two-face consistency recursion for coefficients c."""
    lhs, rhs = _recursion_parts(g, d, c)
    return [a - b for a, b in zip(lhs, rhs)]


def coefficient_recursion_relative(g: WedgeGeometry, d: Drift, c) -> list[float]:
    """Residuals scaled by the magnitude of the recursion terms."""
    lhs, rhs = _recursion_parts(g, d, c)
    return [abs(a - b) / max(abs(a) + abs(b), 1e-300) for a, b in zip(lhs, rhs)]


def _require_admissible(g: WedgeGeometry, d: Drift, tol: float) -> int:
    ell = exponential_order(g, tol)
    if ell is None:
        raise NotSumOfExponentialsError(
            f"alpha = {g.alpha:.12g} is not a nonpositive integer: the stationary "
            "density is not a finite sum of exponentials"
        )
    adm = drift_admissible(g, d, ell, tol)
    if adm is Admissibility.UNSTABLE:
        raise UnstableDriftError(
            f"theta_mu = {d.theta_mu:.12g} outside the stability cone "
            f"({g.xi - g.epsilon:.12g}, {g.delta:.12g})"
        )
    if adm is Admissibility.STABLE_ONLY:
        raise DegenerateDriftError("drift angle hits a degenerate direction")
    return ell


def density_expanded(g: WedgeGeometry, d: Drift, tol: float = ANGLE_TOL) -> SumOfExponentials:
    """The stationary density (up to a constant) as an explicit 2*ell+1 term sum.

    Term labels are exactly Rot_0, Ref_1, Rot_1, ..., Ref_ell, Rot_ell in the
    anticlockwise construction; the k = 0 reflection term is pruned because
    its coefficient vanishes identically.
    """
    ell = _require_admissible(g, d, tol)
    c = block_coefficients(g, d, ell)
    mu = d.mu
    eye = np.eye(2)
    terms = []
    for k in range(ell + 1):
        rot = anticlockwise_rotation(g, k)
        ref = anticlockwise_reflection(g, k)
        a_rot = float(mu @ ((eye - rot.matrix) @ g.v1))
        a_ref = float(mu @ ((eye - ref.matrix) @ g.v1))
        terms.append(ExponentialTerm(c[k] * a_rot, _exponent_of(rot, mu), rot))
        terms.append(ExponentialTerm(-c[k] * a_ref, _exponent_of(ref, mu), ref))
    return SumOfExponentials.from_terms(terms, d, g)


def density_determinant(g: WedgeGeometry, d: Drift, x) -> float:
    """Evaluate the determinant form of the density at a point of the wedge.

    First row: the building blocks at x; lower rows: powers of
    <mu, Rot_j e1> from ell-1 down to 0. For ell = 0 this is the 1x1 case,
    i.e. the single skew-symmetric exponential.
    """
    x = np.asarray(x, dtype=float)
    if not g.contains(x, tol=1e-9 * (1.0 + float(np.linalg.norm(x)))):
        raise DomainError("x must lie in the wedge")
    ell = _require_admissible(g, d, ANGLE_TOL)
    blocks = [density_block(g, d, j) for j in range(ell + 1)]
    row0 = [evaluate(b, x) for b in blocks]
    if ell == 0:
        return row0[0]
    zeta = [float(d.mu @ (anticlockwise_rotation(g, j).matrix @ E1)) for j in range(ell + 1)]
    m = np.empty((ell + 1, ell + 1))
    m[0] = row0
    for i, power in enumerate(range(ell - 1, -1, -1), start=1):
        m[i] = [z**power for z in zeta]
    return float(np.linalg.det(m))


def density_clockwise(g: WedgeGeometry, d: Drift, tol: float = ANGLE_TOL) -> SumOfExponentials:
    """The clockwise construction of the density.

    Implemented by mirroring: swap delta and epsilon, reflect the drift
    across the wedge bisector, run the anticlockwise construction there, and
    map the result back. By uniqueness of the stationary density the result
    is proportional to `density_expanded` wherever both are defined.
    """
    mirrored_g = make_wedge(g.xi, g.epsilon, g.delta)
    mirror = LabelMatrix.reflection(0.5 * g.xi)
    mirrored = density_expanded(mirrored_g, Drift.of(mirror.apply(d.mu)), tol)
    terms = []
    for t in mirrored.terms:
        if t.label.kind == "rotation":
            label = LabelMatrix.rotation(-t.label.angle)
        else:
            label = LabelMatrix.reflection(g.xi - t.label.angle)
        terms.append(ExponentialTerm(t.coeff, mirror.apply(t.exponent), label))
    return SumOfExponentials.from_terms(terms, d, g)


# ---------------------------------------------------------------------------
# Normalisation and region integrals


@dataclass(frozen=True)
class QuadratureSpec:
    """Angular Gauss-Legendre resolution; radial integrals are closed form."""

    angular_nodes: int = 256
    comparison_nodes: int = 128
    sign_grid: tuple = (100, 100)


@dataclass(frozen=True)
class NormalizedDensity:
    """A sign-corrected sum and the positive multiplier giving it unit mass."""

    sum: SumOfExponentials
    normalizing_constant: float  # 1 / integral of `sum` over the wedge
    quadrature_error_estimate: float

    def density(self, x):
        return self.normalizing_constant * evaluate(self.sum, x)


def decay_margin(sum_: SumOfExponentials, g: WedgeGeometry) -> float:
    """min over terms of min(<d, w_0>, <d, w_xi>).

    <d, w_theta> is unimodal in theta, so positivity at both face directions
    is equivalent to a positive decay rate across the whole closed wedge.
    """
    w0, wxi = unit_vector(0.0), unit_vector(g.xi)
    margins = [min(float(t.exponent @ w0), float(t.exponent @ wxi)) for t in sum_.terms]
    return min(margins, default=0.0)


def _mass(sum_: SumOfExponentials, g: WedgeGeometry, nodes: int) -> float:
    theta, w = _quad.gauss_nodes(nodes, 0.0, g.xi)
    ct, st = np.cos(theta), np.sin(theta)
    total = 0.0
    for t in sum_.terms:
        beta = t.exponent[0] * ct + t.exponent[1] * st
        total += t.coeff * float(w @ _quad.radial_full(beta))
    return total


def normalize(
    sum_: SumOfExponentials, g: WedgeGeometry, quad: QuadratureSpec = QuadratureSpec()
) -> NormalizedDensity:
    """Normalise a single-signed, integrable sum to unit mass.

    Raises `NonIntegrableError` when some exponent fails to decay on the
    wedge and `InvalidDensityError` when a polar-grid scan finds a genuine
    sign change. A predominantly negative sum is flipped so the stored sum
    is nonnegative and the normalizing constant positive.
    """
    if not sum_.terms:
        raise InvalidDensityError("cannot normalise an empty sum")
    kappa = decay_margin(sum_, g)
    dmax = max(float(np.linalg.norm(t.exponent)) for t in sum_.terms)
    if kappa <= 1e-12 * dmax:
        raise NonIntegrableError(f"decay margin {kappa:.3e} too small: integral diverges")
    nth, nr = quad.sign_grid
    rmax = 30.0 / kappa
    theta = np.linspace(0.0, g.xi, nth)
    radii = np.linspace(rmax / nr, rmax, nr)
    pts = np.stack(
        [np.outer(radii, np.cos(theta)).ravel(), np.outer(radii, np.sin(theta)).ravel()],
        axis=1,
    )
    vals = evaluate(sum_, pts)
    vmax, vmin = float(vals.max()), float(vals.min())
    atol = 1e-11 * max(abs(vmax), abs(vmin))
    if vmin < -atol and vmax > atol:
        raise InvalidDensityError(
            f"sign change on the scan grid: min {vmin:.3e}, max {vmax:.3e}"
        )
    flipped = abs(vmin) > abs(vmax)
    work = sum_.scaled(-1.0) if flipped else sum_
    z_hi = _mass(work, g, quad.angular_nodes)
    z_lo = _mass(work, g, quad.comparison_nodes)
    if z_hi <= 0.0:
        raise InvalidDensityError(f"nonpositive total mass {z_hi:.3e}")
    return NormalizedDensity(
        sum=work,
        normalizing_constant=1.0 / z_hi,
        quadrature_error_estimate=abs(z_hi - z_lo) / abs(z_hi),
    )


def tail_mass(den: NormalizedDensity, g: WedgeGeometry, rmin: float, nodes: int = 256) -> float:
    """Probability mass of the normalised density beyond radius rmin."""
    theta, w = _quad.gauss_nodes(nodes, 0.0, g.xi)
    ct, st = np.cos(theta), np.sin(theta)
    total = 0.0
    for t in den.sum.terms:
        beta = t.exponent[0] * ct + t.exponent[1] * st
        total += t.coeff * float(w @ _quad.radial_tail(beta, rmin))
    return total * den.normalizing_constant


def region_mass_below(den: NormalizedDensity, g: WedgeGeometry, x, nodes: int = 256) -> float:
    """Mass of {y in S : <y, n1> <= <x, n1>, <y, n2> <= <x, n2>}.

    In polar coordinates the region is r <= R(theta) with
    R = min(c1/sin(theta), c2/sin(xi - theta)); the two constraints cross at
    a single kink angle, so the angular integral is split there and each
    smooth piece integrated with Gauss-Legendre nodes.
    """
    x = np.asarray(x, dtype=float)
    c1 = float(x @ g.n1)
    c2 = float(x @ g.n2)
    if c1 < 0 or c2 < 0:
        raise DomainError("x must lie in the wedge")
    if c1 == 0.0 or c2 == 0.0:
        return 0.0
    tstar = math.atan2(c1 * math.sin(g.xi), c2 + c1 * math.cos(g.xi))
    tstar = min(max(tstar, 0.0), g.xi)
    total = 0.0
    for (a, b, bound, cval) in (
        (0.0, tstar, "f2", c2),
        (tstar, g.xi, "f1", c1),
    ):
        if b - a <= 0:
            continue
        theta, w = _quad.gauss_nodes(nodes, a, b)
        sin_dist = np.sin(g.xi - theta) if bound == "f2" else np.sin(theta)
        rmax = cval / sin_dist
        ct, st = np.cos(theta), np.sin(theta)
        for t in den.sum.terms:
            beta = t.exponent[0] * ct + t.exponent[1] * st
            total += t.coeff * float(w @ _quad.radial_truncated(beta, rmax))
    return total * den.normalizing_constant
