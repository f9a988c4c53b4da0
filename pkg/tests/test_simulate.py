import math

import numpy as np
import pytest

from wedgeflow import (
    DihedralGroup,
    Drift,
    SimConfig,
    density_expanded,
    density_from_group,
    duality_check,
    make_wedge,
    normalize,
    reflection_group_survival,
    simulate_srbm,
    survival_mc,
)
from wedgeflow._backend import have_compiled
from wedgeflow.errors import DomainError, InconsistencyError
from wedgeflow.geometry import unit_vector
from wedgeflow.simulate import (
    choose_radial_cutoff,
    closed_form_bin_masses,
    halves_l1_and_noise,
    histogram_distance,
)

needs_compiled = pytest.mark.skipif(not have_compiled(), reason="compiled kernels unavailable")

QUARTER = make_wedge(math.pi / 2, math.pi / 2, math.pi / 2)
DIAG = Drift.of([1.0, 1.0])


class TestDihedralGroup:
    @pytest.mark.parametrize("m", [2, 3, 4, 5, 7])
    def test_group_sanity(self, m):
        grp = DihedralGroup.of_order(m)
        assert len(grp.elements) == 2 * m
        assert sum(grp.signs) == 0
        assert grp.closure_ok()
        for w, sign in zip(grp.elements, grp.signs):
            mat = w.matrix
            assert np.abs(mat.T @ mat - np.eye(2)).max() <= 1e-14
            assert np.sign(np.linalg.det(mat)) == sign

    def test_listing_order(self):
        # identity first, then the face reflection, then alternating
        from wedgeflow import LabelMatrix

        grp = DihedralGroup.of_order(3)
        assert grp.elements[0].isclose(LabelMatrix.identity())
        assert grp.elements[1].isclose(LabelMatrix.reflection(grp.xi))
        assert grp.signs[0] == 1 and grp.signs[1] == -1


class TestGroupSurvivalFormula:
    def test_quarter_plane_product_form(self):
        grp = DihedralGroup.of_order(2)
        for mu, x in [((1.0, 1.0), (1.0, 1.0)), ((0.8, 1.7), (0.4, 2.0))]:
            got = reflection_group_survival(grp, Drift.of(mu), np.array(x))
            want = (1 - math.exp(-2 * mu[0] * x[0])) * (1 - math.exp(-2 * mu[1] * x[1]))
            assert got == pytest.approx(want, rel=1e-14)

    def test_vanishes_at_vertex(self):
        grp = DihedralGroup.of_order(3)
        d = Drift.from_angle(math.pi / 6)
        x = 1e-7 * unit_vector(math.pi / 6)
        assert abs(reflection_group_survival(grp, d, x)) <= 1e-12

    def test_range_and_monotonicity(self):
        # monotone in the pair (<x, n1>, <x, n2>); a displacement increases both
        # exactly when it lies in the wedge itself, so probe along w_0, w_xi,
        # and the bisector (along a single normal the other component drops
        # whenever xi != pi/2)
        grp = DihedralGroup.of_order(3)
        g = make_wedge(grp.xi, grp.xi, grp.xi)
        d = Drift.from_angle(0.4 * grp.xi)
        rng = np.random.default_rng(1)
        probes = [unit_vector(0.0), unit_vector(g.xi), unit_vector(0.5 * g.xi)]
        for _ in range(50):
            x = rng.uniform(0.05, 3.0) * unit_vector(rng.uniform(0.02, 0.98) * grp.xi)
            v = reflection_group_survival(grp, d, x)
            assert -1e-10 <= v <= 1 + 1e-10
            for n in probes:
                assert reflection_group_survival(grp, d, x + 0.3 * n) >= v - 1e-12

    def test_quarter_plane_monotone_along_normals(self):
        grp = DihedralGroup.of_order(2)
        g = make_wedge(grp.xi, grp.xi, grp.xi)
        d = Drift.of([0.9, 1.2])
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.uniform(0.05, 2.0, size=2)
            v = reflection_group_survival(grp, d, x)
            for n in (g.n1, g.n2):
                assert reflection_group_survival(grp, d, x + 0.4 * n) >= v - 1e-12

    def test_inconsistency_flagged(self):
        grp = DihedralGroup.of_order(2)
        with pytest.raises(InconsistencyError):
            reflection_group_survival(grp, Drift.of([1.0, 1.0]), np.array([-1.0, 1.0]))


class TestGroupDensity:
    @pytest.mark.parametrize("m,count", [(2, 1), (3, 3), (4, 5), (5, 7)])
    def test_term_counts(self, m, count):
        xi = math.pi / m
        g = make_wedge(xi, xi, xi)
        d = Drift.from_angle(0.37 * xi, 1.1)
        assert len(density_from_group(DihedralGroup.of_order(m), g, d)) == count

    def test_requires_symmetric_geometry(self):
        g = make_wedge(math.pi / 3, math.pi / 4, math.pi / 3)
        with pytest.raises(DomainError):
            density_from_group(DihedralGroup.of_order(3), g, Drift.from_angle(0.2))


class TestDuality:
    def test_quarter_plane_closed_form(self):
        res = duality_check(QUARTER, DIAG, np.array([1.0, 1.0]))
        want = (1 - math.exp(-2)) ** 2
        assert res.lhs == pytest.approx(want, abs=1e-8)
        assert res.rhs == pytest.approx(want, rel=1e-14)
        assert abs(res.diff) <= 1e-8

    def test_third_wedge_points(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        for x in (np.array([0.8, 0.3]), np.array([0.5, 0.5]), np.array([1.5, 0.9])):
            assert g.contains(x)
            res = duality_check(g, d, x)
            assert abs(res.diff) <= 1e-6

    def test_far_point_tends_to_one(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        res = duality_check(g, d, 40.0 * unit_vector(g.xi / 2))
        assert res.lhs == pytest.approx(1.0, abs=1e-5)
        assert res.rhs == pytest.approx(1.0, abs=1e-6)


SMALL = SimConfig(dt=1e-3, steps=600, paths=48, seed=11, start=(0.5, 0.5), burn_in=300)


class TestReflectedWalk:
    def test_deterministic_given_seed(self):
        a = simulate_srbm(QUARTER, DIAG, SMALL)
        b = simulate_srbm(QUARTER, DIAG, SMALL)
        assert np.array_equal(a.histogram, b.histogram)
        assert a.overflow == b.overflow and a.vertex_projections == b.vertex_projections

    @needs_compiled
    def test_backends_bit_identical(self):
        a = simulate_srbm(QUARTER, DIAG, SMALL, backend="compiled")
        b = simulate_srbm(QUARTER, DIAG, SMALL, backend="python")
        assert np.array_equal(a.histogram, b.histogram)
        assert np.array_equal(a.hist_even, b.hist_even)
        assert a.overflow == b.overflow and a.vertex_projections == b.vertex_projections

    def test_histogram_mass_equals_visits(self):
        res = simulate_srbm(QUARTER, DIAG, SMALL)
        assert res.histogram.sum() == res.visits
        assert res.visits + res.overflow == SMALL.paths * SMALL.steps

    def test_zero_noise_drifts_to_vertex(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        cfg = SimConfig(dt=1e-3, steps=500, paths=4, seed=0, start=(0.8, 0.5), burn_in=4000)
        res = simulate_srbm(g, d, cfg, diffusion=False, radial_cutoff=3.0)
        # pure drift with pushing slides every path into the vertex bin
        assert res.histogram[:, 0].sum() == res.visits
        assert res.overflow == 0

    def test_unstable_drift_mass_escapes(self):
        d = Drift.of([-1.0, -1.0])  # interior drift +mu points away from the vertex
        cfg1 = SimConfig(dt=1e-3, steps=300, paths=64, seed=3, start=(0.5, 0.5), burn_in=0)
        cfg2 = SimConfig(dt=1e-3, steps=3000, paths=64, seed=3, start=(0.5, 0.5), burn_in=0)
        r1 = simulate_srbm(QUARTER, d, cfg1, radial_cutoff=4.0)
        r2 = simulate_srbm(QUARTER, d, cfg2, radial_cutoff=4.0)
        assert r2.overflow / r2.samples > r1.overflow / r1.samples

    def test_occupation_stabilises_across_halves(self):
        cfg = SimConfig(dt=1e-3, steps=2500, paths=512, seed=21, start=(0.5, 0.5), burn_in=2000)
        res = simulate_srbm(QUARTER, DIAG, cfg)
        l1, noise = halves_l1_and_noise(res, cfg.paths)
        assert l1 <= 3.0 * noise

    def test_radial_cutoff_tail(self):
        from wedgeflow.density import tail_mass

        r = choose_radial_cutoff(QUARTER, DIAG)
        den = normalize(density_expanded(QUARTER, DIAG), QUARTER)
        assert tail_mass(den, QUARTER, r) < 1e-4
        assert tail_mass(den, QUARTER, 0.9 * r) > 1e-5


class TestSurvival:
    def test_quarter_plane_matches_product_form(self):
        res = survival_mc(
            QUARTER, DIAG, np.array([1.0, 1.0]), 40.0,
            SimConfig(dt=1e-3, steps=1, paths=20000, seed=42),
        )
        want = (1 - math.exp(-2)) ** 2
        assert abs(res.estimate - want) <= 3.0 * res.standard_error
        assert abs(res.estimate - res.estimate_half_horizon) <= 0.5 * res.standard_error

    def test_far_start_survives(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        res = survival_mc(g, d, 30.0 * unit_vector(g.xi / 2), 10.0,
                          SimConfig(dt=1e-3, steps=1, paths=500, seed=1))
        assert res.estimate == pytest.approx(1.0, abs=1e-3)

    def test_boundary_start_exits(self):
        res = survival_mc(QUARTER, DIAG, np.array([1.0, 0.0]), 5.0,
                          SimConfig(dt=1e-3, steps=1, paths=300, seed=2))
        assert res.estimate == 0.0

    def test_deterministic(self):
        cfg = SimConfig(dt=1e-3, steps=1, paths=2000, seed=9)
        a = survival_mc(QUARTER, DIAG, np.array([0.7, 1.1]), 20.0, cfg)
        b = survival_mc(QUARTER, DIAG, np.array([0.7, 1.1]), 20.0, cfg)
        assert a == b

    @needs_compiled
    def test_backends_agree(self):
        cfg = SimConfig(dt=1e-3, steps=1, paths=4000, seed=5)
        a = survival_mc(QUARTER, DIAG, np.array([1.0, 1.0]), 30.0, cfg, backend="compiled")
        b = survival_mc(QUARTER, DIAG, np.array([1.0, 1.0]), 30.0, cfg, backend="python")
        # exp() rounding may differ between libm and numpy in the bridge factor
        assert abs(a.estimate - b.estimate) <= 4.0 / cfg.paths

    def test_third_wedge_against_formula(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(0.4 * g.xi)
        x = np.array([0.9 * math.cos(0.4), 0.9 * math.sin(0.4)])
        want = reflection_group_survival(DihedralGroup.of_order(3), d, x)
        res = survival_mc(g, d, x, 40.0, SimConfig(dt=1e-3, steps=1, paths=20000, seed=8))
        assert abs(res.estimate - want) <= 3.0 * res.standard_error

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            survival_mc(QUARTER, DIAG, np.array([1.0, 1.0]), -1.0,
                        SimConfig(dt=1e-3, steps=1, paths=10, seed=0))
        with pytest.raises(DomainError):
            survival_mc(QUARTER, DIAG, np.array([-0.5, 1.0]), 1.0,
                        SimConfig(dt=1e-3, steps=1, paths=10, seed=0))
        with pytest.raises(DomainError):
            survival_mc(QUARTER, Drift.of([1.0, -0.2]), np.array([1.0, 1.0]), 1.0,
                        SimConfig(dt=1e-3, steps=1, paths=10, seed=0))


class TestHistogramComparison:
    def test_distance_to_own_masses_is_noise(self):
        cfg = SimConfig(dt=2e-3, steps=3000, paths=256, seed=31, start=(0.5, 0.5), burn_in=1000)
        res = simulate_srbm(QUARTER, DIAG, cfg)
        den = normalize(density_expanded(QUARTER, DIAG), QUARTER)
        masses = closed_form_bin_masses(den, QUARTER, res.theta_edges, res.r_edges)
        assert masses.sum() == pytest.approx(1.0, abs=2e-4)
        l1, l2 = histogram_distance(res, masses)
        assert l1 < 0.5  # coarse run; tight bound exercised in acceptance
        assert l2 < l1
