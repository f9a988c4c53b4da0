"""Monte Carlo for the wedge: reflected paths, survival probabilities, and the
reflection-group identities they validate.

The reflected walk uses the projected Euler scheme: after each Gaussian step
the state is pushed back into the wedge along the face's pushing direction
with the minimal nonnegative multiple (iterated near the vertex, at most
`max_push` times, then projected onto the vertex). The scheme carries the
usual O(sqrt(dt)) stationary bias of projection discretisations.

Paths draw their noise from counter-based Philox streams keyed by
(seed, path index), so runs are deterministic, path-parallel, and
reproducible chunk by chunk across both kernel backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .density import (
    NormalizedDensity,
    SumOfExponentials,
    ExponentialTerm,
    density_expanded,
    normalize,
    tail_mass,
    region_mass_below,
)
from .errors import DomainError, InconsistencyError, NumericalBlowupError
from .geometry import ANGLE_TOL, Drift, LabelMatrix, WedgeGeometry

__all__ = [
    "SimConfig",
    "SimResult",
    "SurvivalResult",
    "DihedralGroup",
    "simulate_srbm",
    "survival_mc",
    "reflection_group_survival",
    "density_from_group",
    "duality_check",
    "DualityResult",
    "closed_form_bin_masses",
    "histogram_distance",
    "halves_l1_and_noise",
    "choose_radial_cutoff",
]

_NOISE_CHUNK = 2048
_NOISE_BUDGET = 12_000_000  # doubles per noise array per chunk (~100 MB)


@dataclass(frozen=True)
class SimConfig:
    """Discretisation, path count, seeding and start for a Monte Carlo run."""

    dt: float
    steps: int
    paths: int
    seed: int
    start: tuple = (0.5, 0.5)
    burn_in: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise DomainError("dt must be positive")
        if self.steps < 1 or self.paths < 1 or self.burn_in < 0:
            raise DomainError("steps/paths must be >= 1 and burn_in >= 0")


@dataclass(frozen=True)
class SimResult:
    """Occupation histogram of a reflected run on a fixed polar grid."""

    histogram: np.ndarray  # (ntheta, nr) int64 counts
    visits: int  # in-range recorded positions; equals histogram.sum()
    exit_fraction: float  # 0 for reflected runs (kept for symmetry with survival)
    standard_error: float  # expected L1 sampling noise of the binned masses
    theta_edges: np.ndarray
    r_edges: np.ndarray
    overflow: int
    vertex_projections: int
    hist_even: np.ndarray = field(repr=False, default=None)
    hist_odd: np.ndarray = field(repr=False, default=None)
    bin_variance: np.ndarray = field(repr=False, default=None)  # Var of per-path bin fractions

    @property
    def samples(self) -> int:
        return self.visits + self.overflow

    def masses(self) -> np.ndarray:
        return self.histogram / self.samples


def _philox_generators(seed: int, paths: int):
    return [
        np.random.Generator(np.random.Philox(key=((seed & 0xFFFFFFFFFFFFFFFF) << 64) | p))
        for p in range(paths)
    ]


def _fill_noise(gens, shape_per_path, out):
    for p, gen in enumerate(gens):
        out[p] = gen.standard_normal(shape_per_path)


def choose_radial_cutoff(g: WedgeGeometry, d: Drift, tail: float = 1e-4) -> float:
    """Radius beyond which the closed-form density leaves mass < ``tail``.

    Falls back to a drift-scale heuristic when no closed form exists.
    """
    try:
        den = normalize(density_expanded(g, d), g)
    except Exception:
        return 10.0 / d.norm
    lo, hi = 0.5, 2.0
    while tail_mass(den, g, hi) >= tail and hi < 1e4:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail_mass(den, g, mid) < tail:
            hi = mid
        else:
            lo = mid
    return hi


def simulate_srbm(
    g: WedgeGeometry,
    d: Drift,
    cfg: SimConfig,
    *,
    bins: tuple = (64, 128),
    radial_cutoff: float | None = None,
    backend: str | None = None,
    diffusion: bool = True,
    max_push: int = 8,
    vertex_tol: float = 1e-9,
) -> SimResult:
    """Simulate the reflected walk and histogram its post-burn-in positions.

    Requires alpha < 1 (otherwise the reflected process is not defined).
    Post-burn-in positions land on a (bins[0] x bins[1]) polar grid with
    radial cutoff chosen so the closed-form density (when available) leaves
    mass below 1e-4 outside; out-of-range positions are counted separately
    in ``overflow`` so histogram mass equals in-range visits exactly.
    """
    if g.alpha >= 1.0:
        raise DomainError(f"alpha = {g.alpha:.6g} >= 1: reflected process undefined")
    kern = _backend.resolve(backend)
    nth, nr = bins
    rmax = radial_cutoff if radial_cutoff is not None else choose_radial_cutoff(g, d)
    start = np.asarray(cfg.start, dtype=float)
    if not g.contains(start, tol=1e-12):
        raise DomainError("start must lie in the wedge")

    x = np.tile(start, (cfg.paths, 1))
    counts = np.zeros((cfg.paths, nth * nr), dtype=np.int32)
    overflow = np.zeros(cfg.paths, dtype=np.int64)
    bound = np.linspace(0.0, g.xi, nth + 1)
    bs_cos, bs_sin = np.cos(bound), np.sin(bound)
    inv_dr = nr / rmax
    sqdt = math.sqrt(cfg.dt) if diffusion else 0.0
    drift0, drift1 = -d.mu[0] * cfg.dt, -d.mu[1] * cfg.dt

    gens = _philox_generators(cfg.seed, cfg.paths)
    total = cfg.burn_in + cfg.steps
    nvertex = 0
    done = 0
    z = None
    while done < total:
        csteps = min(_NOISE_CHUNK, total - done, max(128, _NOISE_BUDGET // (2 * cfg.paths)))
        if z is None or z.shape[1] != csteps:
            z = np.empty((cfg.paths, csteps, 2))
        if diffusion:
            _fill_noise(gens, (csteps, 2), z)
        else:
            z.fill(0.0)
        nv, finite = kern.srbm_chunk(
            x, z, drift0, drift1, sqdt,
            g.n1[0], g.n1[1], g.v1[0], g.v1[1],
            g.n2[0], g.n2[1], g.v2[0], g.v2[1],
            bs_cos, bs_sin, inv_dr, nth, nr,
            counts, overflow, cfg.burn_in - done, max_push, vertex_tol,
        )
        nvertex += nv
        if not finite:
            raise NumericalBlowupError("simulation state became non-finite")
        done += csteps

    hist = counts.sum(axis=0, dtype=np.int64).reshape(nth, nr)
    hist_even = counts[0::2].sum(axis=0, dtype=np.int64).reshape(nth, nr)
    hist_odd = counts[1::2].sum(axis=0, dtype=np.int64).reshape(nth, nr)
    samples = cfg.paths * cfg.steps
    per_path = cfg.steps
    frac = counts / per_path
    bin_var = frac.var(axis=0, ddof=1) if cfg.paths > 1 else np.zeros(nth * nr)
    se_l1 = float(np.sqrt(bin_var / cfg.paths).sum() * math.sqrt(2.0 / math.pi))
    return SimResult(
        histogram=hist,
        visits=int(hist.sum()),
        exit_fraction=0.0,
        standard_error=se_l1,
        theta_edges=bound,
        r_edges=np.linspace(0.0, rmax, nr + 1),
        overflow=int(overflow.sum()),
        vertex_projections=int(nvertex),
        hist_even=hist_even,
        hist_odd=hist_odd,
        bin_variance=bin_var.reshape(nth, nr),
    )


def closed_form_bin_masses(
    den: NormalizedDensity, g: WedgeGeometry, theta_edges, r_edges, nodes: int = 4
) -> np.ndarray:
    """Exact-in-r, Gauss-in-theta masses of the normalised density per polar bin."""
    from . import _quad

    theta_edges = np.asarray(theta_edges)
    r_edges = np.asarray(r_edges)
    nth, nr = theta_edges.size - 1, r_edges.size - 1
    out = np.zeros((nth, nr))
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    for i in range(nth):
        a, b = theta_edges[i], theta_edges[i + 1]
        tt = 0.5 * (b - a) * gx + 0.5 * (a + b)
        ww = 0.5 * (b - a) * gw
        ct, st = np.cos(tt), np.sin(tt)
        for t in den.sum.terms:
            beta = t.exponent[0] * ct + t.exponent[1] * st
            lower = _quad.radial_truncated(beta[:, None], r_edges[None, :-1])
            upper = _quad.radial_truncated(beta[:, None], r_edges[None, 1:])
            out[i] += t.coeff * (ww @ (upper - lower))
    return out * den.normalizing_constant


def histogram_distance(result: SimResult, masses: np.ndarray):
    """(L1, L2) distance between the empirical and reference bin masses.

    The region beyond the radial cutoff enters as one extra cell comparing
    the overflow fraction against the reference tail mass.
    """
    emp = result.histogram / result.samples
    tail_emp = result.overflow / result.samples
    tail_ref = 1.0 - masses.sum()
    diff = emp - masses
    l1 = float(np.abs(diff).sum() + abs(tail_emp - tail_ref))
    l2 = float(math.sqrt((diff**2).sum() + (tail_emp - tail_ref) ** 2))
    return l1, l2


def halves_l1_and_noise(result: SimResult, paths: int):
    """L1 distance between the even/odd path halves of a run, together with
    its expected value under independent-path sampling noise.

    Per-bin fraction variance is estimated across paths, so time correlation
    within a path is accounted for exactly.
    """
    n_even = (paths + 1) // 2
    n_odd = paths // 2
    pe = result.hist_even / result.hist_even.sum()
    po = result.hist_odd / result.hist_odd.sum()
    l1 = float(np.abs(pe - po).sum())
    var_diff = result.bin_variance * (1.0 / n_even + 1.0 / n_odd)
    noise = float(np.sqrt(var_diff).sum() * math.sqrt(2.0 / math.pi))
    return l1, noise


# --- survival ---------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalResult:
    """Estimated non-exit probability with its uncertainty and horizon checks."""

    estimate: float
    standard_error: float
    estimate_half_horizon: float
    paths: int
    horizon: float
    dt: float
    safe_fraction: float


def survival_mc(
    g: WedgeGeometry,
    d: Drift,
    x,
    horizon: float,
    cfg: SimConfig,
    *,
    backend: str | None = None,
    bridge: bool = True,
    safe_margin: float = 12.0,
) -> SurvivalResult:
    """Estimate the probability that free Brownian motion started at -x with
    drift -mu never leaves -S.

    Simulated as the negated path y = x + mu t + W staying in S. Exits are
    detected at step ends and, when ``bridge`` is set, between steps via the
    Brownian-bridge crossing probability exp(-2 a b / dt) per face. Paths
    whose face distances both exceed safe_margin / <mu, n_i> are retired as
    survivors (residual exit probability below exp(-2*safe_margin)); the
    finite-horizon proxy is checked by also reporting survival to horizon/2.
    """
    if horizon <= 0.0:
        raise DomainError("horizon must be positive")
    x = np.asarray(x, dtype=float)
    mu = d.mu
    if x @ g.n1 < 0 or x @ g.n2 < 0:
        raise DomainError("x must lie in the wedge")
    # a boundary start exits immediately: the first bridge factor is exp(0) = 1
    c1, c2 = float(mu @ g.n1), float(mu @ g.n2)
    if not (c1 > 0 and c2 > 0):
        raise DomainError("drift must lie in the open wedge")
    kern = _backend.resolve(backend)
    steps = int(math.ceil(horizon / cfg.dt))
    half = steps // 2

    y = np.tile(x, (cfg.paths, 1))
    active = np.ones(cfg.paths, dtype=np.int8)
    death_step = np.full(cfg.paths, -1, dtype=np.int64)
    d1 = np.full(cfg.paths, float(x @ g.n1))
    d2 = np.full(cfg.paths, float(x @ g.n2))
    safe1, safe2 = safe_margin / c1, safe_margin / c2
    sqdt = math.sqrt(cfg.dt)
    gens = _philox_generators(cfg.seed, cfg.paths)

    done = 0
    act = np.arange(cfg.paths, dtype=np.int64)
    while done < steps and act.size:
        # noise is generated per active path only; dead/retired streams stop
        csteps = min(steps - done, max(256, _NOISE_BUDGET // act.size))
        z = np.empty((act.size, csteps, 2))
        u = np.empty((act.size, csteps))
        for i, p in enumerate(act):
            z[i] = gens[p].standard_normal((csteps, 2))
            u[i] = gens[p].random(csteps)
        kern.survival_chunk(
            y, z, u, active, death_step, d1, d2,
            mu[0] * cfg.dt, mu[1] * cfg.dt, sqdt,
            g.n1[0], g.n1[1], g.n2[0], g.n2[1],
            -2.0 / cfg.dt, safe1, safe2, bridge, done, act,
        )
        done += csteps
        act = act[active[act] == 1]

    alive = death_step < 0
    est = float(alive.mean())
    est_half = float((alive | (death_step >= half)).mean())
    se = math.sqrt(max(est * (1.0 - est), 1e-300) / cfg.paths)
    return SurvivalResult(
        estimate=est,
        standard_error=se,
        estimate_half_horizon=est_half,
        paths=cfg.paths,
        horizon=horizon,
        dt=cfg.dt,
        safe_fraction=float((active == 2).mean()),
    )


# --- reflection group -------------------------------------------------------


@dataclass(frozen=True)
class DihedralGroup:
    """The 2m orthogonal matrices generated by the wedge-wall reflections."""

    m: int
    elements: tuple
    signs: tuple

    @staticmethod
    def of_order(m: int) -> "DihedralGroup":
        if m < 2:
            raise DomainError("m must be >= 2")
        xi = math.pi / m
        elements, signs = [], []
        for k in range(m):
            elements.append(LabelMatrix.rotation(2.0 * k * xi))
            signs.append(1)
            elements.append(LabelMatrix.reflection((k + 1) * xi))  # rho_{2k xi} R_xi
            signs.append(-1)
        return DihedralGroup(m=m, elements=tuple(elements), signs=tuple(signs))

    @property
    def xi(self) -> float:
        return math.pi / self.m

    def closure_ok(self, tol: float = 1e-12) -> bool:
        for a in self.elements:
            for b in self.elements:
                prod = a @ b
                if not any(prod.isclose(e, tol) for e in self.elements):
                    return False
        return True


def reflection_group_survival(group: DihedralGroup, d: Drift, x) -> float:
    """Non-exit probability via the alternating sum over the reflection group.

    Valid for x and mu in the (closure of the) wedge of angle pi/m; raises
    `InconsistencyError` when the sum leaves [0, 1] beyond rounding, which
    signals an inadmissible x or mu.
    """
    x = np.asarray(x, dtype=float)
    mu = d.mu
    total = 0.0
    for w, sign in zip(group.elements, group.signs):
        total += sign * math.exp(-float(mu @ ((np.eye(2) - w.matrix) @ x)))
    if not (-1e-10 <= total <= 1.0 + 1e-10):
        raise InconsistencyError(f"group survival sum {total!r} outside [0, 1]")
    return total


def density_from_group(group: DihedralGroup, g: WedgeGeometry, d: Drift) -> SumOfExponentials:
    """Stationary density (up to a constant) in the symmetric reflection-group
    geometry delta = epsilon = xi = pi/m, as a signed sum over the group.

    The prefactor <mu,(I-w)v2><mu,(I-w)v1> vanishes for three elements, so
    exactly 2m - 3 terms survive pruning.
    """
    xi = group.xi
    if (
        abs(g.xi - xi) > ANGLE_TOL
        or abs(g.delta - xi) > ANGLE_TOL
        or abs(g.epsilon - xi) > ANGLE_TOL
    ):
        raise DomainError("geometry must satisfy delta = epsilon = xi = pi/m")
    mu = d.mu
    if not (mu @ g.n1 > 0 and mu @ g.n2 > 0):
        raise DomainError("drift must lie in the open wedge")
    eye = np.eye(2)
    terms = []
    for w, sign in zip(group.elements, group.signs):
        mat = w.matrix
        coeff = sign * float(mu @ ((eye - mat) @ g.v2)) * float(mu @ ((eye - mat) @ g.v1))
        terms.append(ExponentialTerm(coeff, (eye - mat).T @ mu, w))
    return SumOfExponentials.from_terms(terms, d, g)


@dataclass(frozen=True)
class DualityResult:
    lhs: float  # stationary mass of the corner region below x
    rhs: float  # group survival probability at -x
    diff: float


def duality_check(g: WedgeGeometry, d: Drift, x, nodes: int = 256) -> DualityResult:
    """Check the time-reversal identity in the symmetric geometry.

    The stationary mass of {y : <y, n_i> <= <x, n_i>} (closed-form density,
    quadrature) must equal the group survival probability (alternating sum).
    """
    m = round(math.pi / g.xi)
    xi = math.pi / m
    if (
        m < 2
        or abs(g.xi - xi) > ANGLE_TOL
        or abs(g.delta - xi) > ANGLE_TOL
        or abs(g.epsilon - xi) > ANGLE_TOL
    ):
        raise DomainError("duality requires delta = epsilon = xi = pi/m")
    den = normalize(density_expanded(g, d), g)
    lhs = region_mass_below(den, g, x, nodes=nodes)
    rhs = reflection_group_survival(DihedralGroup.of_order(m), d, np.asarray(x, dtype=float))
    return DualityResult(lhs=lhs, rhs=rhs, diff=lhs - rhs)
