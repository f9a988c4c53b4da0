import math

import numpy as np
import pytest

from wedgeflow import (
    Drift,
    LabelMatrix,
    bar_residual,
    bc_residual,
    boundary_pair_check,
    density_block,
    density_expanded,
    evaluate,
    make_wedge,
    mating_path,
    normalize,
    pde_residual,
    range_restriction_check,
    sign_scan,
    validate_density,
)
from wedgeflow.density import ExponentialTerm, SumOfExponentials
from wedgeflow.errors import DegeneratePairError, DomainError
from wedgeflow.geometry import unit_vector
from wedgeflow.validation import MatingPath, pde_residual_fd
from wedgeflow._quad import gauss_nodes, radial_full

from conftest import admissible_drift
from test_density import wedge_points


class TestInteriorResidual:
    def test_densities_solve_interior_equation(self, parameter_cases):
        for g, d, ell in parameter_cases:
            assert pde_residual(density_expanded(g, d), d, wedge_points(g, 3)) <= 1e-10

    def test_violating_term_detected(self):
        g = make_wedge(math.pi / 2, math.pi / 2, math.pi / 2)
        d = Drift.of([1.0, 1.0])
        bad = SumOfExponentials(
            (ExponentialTerm(1.0, d.mu.copy(), LabelMatrix.identity()),), d, g
        )  # |d|^2 = 2 != 4 = 2<mu, d>
        assert pde_residual(bad, d, [[0.5, 0.5]], fd_check=False) > 0.1

    def test_zero_sum(self):
        g = make_wedge(1.0, 1.0, 1.0)
        s = SumOfExponentials((), Drift.of([1, 0]), g)
        assert pde_residual(s, Drift.of([1, 0]), [[1.0, 0.5]]) == 0.0

    def test_finite_difference_agreement(self, parameter_cases):
        g, d, ell = parameter_cases[3]
        s = density_expanded(g, d)
        pts = wedge_points(g, 8, n=10)
        fd = pde_residual_fd(s, d, pts)
        assert np.all(fd <= 1e-4)  # analytic residual is ~1e-16, so fd is pure noise


class TestBoundaryResidual:
    def test_densities_satisfy_both_faces(self, parameter_cases):
        ss = np.geomspace(1e-3, 20, 60)
        for g, d, ell in parameter_cases:
            s = density_expanded(g, d)
            assert bc_residual(s, d, g, 1, ss) <= 1e-10
            assert bc_residual(s, d, g, 2, ss) <= 1e-10

    def test_single_skew_term_face1_only(self):
        # with delta + epsilon != pi the single exponential fails face 2
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        single = density_block(g, d, 0)
        ss = np.geomspace(1e-2, 5, 20)
        assert bc_residual(single, d, g, 1, ss) <= 1e-12
        assert bc_residual(single, d, g, 2, ss) > 1e-3

    def test_invalid_face(self):
        g = make_wedge(1.0, 1.0, 1.0)
        s = SumOfExponentials((), Drift.of([1, 0]), g)
        with pytest.raises(DomainError):
            bc_residual(s, Drift.of([1, 0]), g, 3, [1.0])


class TestBoundaryPairs:
    def test_pairs_satisfy_interior_equation(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6, 1.3)
        rng = np.random.default_rng(5)
        for gamma in rng.uniform(0.05, math.pi - 0.05, 20):
            for face in (1, 2):
                pair = boundary_pair_check(g, d, gamma, face)
                assert pde_residual(pair, d, wedge_points(g, 6, n=20)) <= 1e-10

    def test_block_multiples_are_pairs(self):
        # gamma = k*xi reproduces the labels of the k-th density block
        g = make_wedge(math.pi / 4, math.pi / 4, math.pi / 4)
        d = admissible_drift(g, 2, 12)
        for k in (1, 2):
            pair = boundary_pair_check(g, d, k * g.xi, 1)
            blk = density_block(g, d, k)
            labels = sorted((t.label.kind, round(t.label.canonical_angle(), 9)) for t in pair.terms)
            expected = sorted((t.label.kind, round(t.label.canonical_angle(), 9)) for t in blk.terms)
            assert labels == expected
            pts = wedge_points(g, 14, n=30)
            ratio = evaluate(pair, pts) / evaluate(blk, pts)
            assert (ratio.max() - ratio.min()) / abs(ratio.mean()) <= 1e-10

    def test_shared_face_component(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6, 1.3)
        w0 = unit_vector(0.0)
        pair = boundary_pair_check(g, d, 0.9, 1)
        c0, c1 = (float(t.exponent @ w0) for t in pair.terms)
        assert c0 == pytest.approx(c1, abs=1e-12)

    def test_degenerate_pair(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6, 1.0)
        gamma = d.theta_mu - g.delta + math.pi  # reflection fixes the drandom inner product
        with pytest.raises(DegeneratePairError):
            boundary_pair_check(g, d, gamma, 1)


class TestBarIdentity:
    def test_quarter_plane_hand_value(self):
        g = make_wedge(math.pi / 2, math.pi / 2, math.pi / 2)
        d = Drift.of([1.0, 1.0])
        den = normalize(density_expanded(g, d), g)
        res = bar_residual(den, g, d, [[1.0, 1.0]])
        assert res.max_residual <= 1e-10

    def test_random_probes(self, parameter_cases):
        rng = np.random.default_rng(2)
        for g, d, ell in parameter_cases[:6]:
            den = normalize(density_expanded(g, d), g)
            lo = g.xi - 0.5 * math.pi + 0.05
            hi = 0.5 * math.pi - 0.05
            args = rng.uniform(min(lo, hi - 1e-3), hi, 8)
            norms = rng.uniform(0.3, 3.0, 8)
            lams = np.stack([norms * np.cos(args), norms * np.sin(args)], axis=1)
            res = bar_residual(den, g, d, lams)
            assert res.max_residual <= max(1e-8, 10 * res.error_estimate)

    def test_lambda_preconditions(self):
        g = make_wedge(math.pi / 2, math.pi / 2, math.pi / 2)
        d = Drift.of([1.0, 1.0])
        den = normalize(density_expanded(g, d), g)
        with pytest.raises(DomainError):
            bar_residual(den, g, d, [[0.0, 0.0]])
        with pytest.raises(DomainError):
            bar_residual(den, g, d, [[-1.0, 0.5]])  # outside the dual cone

    def test_face_measure_limit(self):
        # scaling lambda along n1 recovers the face-1 density p/2:
        # t * integral_S e^{-<lam, x>} p -> integral_0^inf e^{-l1 s} p(s w0) ds
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        den = normalize(density_expanded(g, d), g)
        l1, t = 0.7, 1000.0
        lam = l1 * unit_vector(0.0) + t * g.n1
        theta, wq = gauss_nodes(4096, 0.0, g.xi)
        ct, st = np.cos(theta), np.sin(theta)
        area = 0.0
        for term in den.sum.terms:
            beta = (term.exponent[0] + lam[0]) * ct + (term.exponent[1] + lam[1]) * st
            area += term.coeff * float(wq @ radial_full(beta))
        face = sum(
            term.coeff / float((term.exponent + lam * np.array([1.0, 0.0])) @ unit_vector(0.0))
            for term in den.sum.terms
        )
        assert t * area / face == pytest.approx(1.0, abs=2e-2)


class TestSignScan:
    def test_densities_single_signed(self, parameter_cases):
        for g, d, ell in parameter_cases[:9]:
            assert sign_scan(density_expanded(g, d), g).no_sign_change

    def test_handcrafted_sign_change(self):
        g = make_wedge(math.pi / 2, math.pi / 2, math.pi / 2)
        d = Drift.of([1.0, 0.5])
        terms = (
            ExponentialTerm(1.0, np.array([1.0, 0.1]), LabelMatrix.identity()),
            ExponentialTerm(-2.0, np.array([2.0, 0.1]), LabelMatrix.rotation(0.3)),
        )
        scan = sign_scan(SumOfExponentials(terms, d, g), g, rmax=5.0)
        assert not scan.no_sign_change

    def test_vertex_decay_consistent_with_zero(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        d = Drift.from_angle(math.pi / 6)
        s = density_expanded(g, d)
        r = 1e-4
        vals = [abs(evaluate(s, r * unit_vector(th))) for th in np.linspace(0, g.xi, 20)]
        assert max(vals) <= 5.0 * r  # |density| <= C * r near the vertex


class TestMating:
    def test_order_two_label_sequence(self):
        g = make_wedge(math.pi / 4, math.pi / 4, math.pi / 4)
        path = mating_path(g)
        assert path.closed and len(path) == 5
        expected = [
            LabelMatrix.rotation(2 * g.delta),
            LabelMatrix.reflection(g.delta + g.xi),
            LabelMatrix.rotation(2 * g.delta + 2 * g.xi),
            LabelMatrix.reflection(g.delta + 2 * g.xi),
            LabelMatrix.rotation(2 * g.delta + 4 * g.xi),
        ]
        for got, want in zip(path.labels, expected):
            assert got.kind == want.kind and got.isclose(want)
        assert path.edge_types == ("BC2", "BC1", "BC2", "BC1")

    def test_closure_and_endpoints(self, parameter_cases):
        for g, d, ell in parameter_cases:
            path = mating_path(g)
            assert path.closed and len(path) == 2 * ell + 1
            assert path.endpoints[0].isclose(LabelMatrix.rotation(2 * g.delta))
            assert path.endpoints[1].isclose(LabelMatrix.rotation(-2 * g.epsilon), tol=1e-9)

    def test_no_closure_for_fractional_order(self):
        g = make_wedge(math.pi / 3, math.pi / 4, math.pi / 4)  # alpha = -1.5
        path = mating_path(g, max_len=64)
        assert not path.closed and len(path) == 64

    def test_labels_match_density_terms(self, parameter_cases):
        from collections import Counter

        for g, d, ell in parameter_cases:
            def key(lbl):
                return (lbl.kind, round(lbl.canonical_angle(), 9))

            path = Counter(key(l) for l in mating_path(g).labels)
            dens = Counter(key(t.label) for t in density_expanded(g, d).terms)
            assert path == dens

    def test_edges_pair_matching_exponents(self, parameter_cases):
        w0, = (unit_vector(0.0),)
        for g, d, ell in parameter_cases:
            wxi = unit_vector(g.xi)
            path = mating_path(g)
            mu = d.mu
            exps = [(np.eye(2) - lbl.matrix).T @ mu for lbl in path.labels]
            for i, edge in enumerate(path.edge_types):
                a, b = exps[i], exps[i + 1]
                w = wxi if edge == "BC2" else w0
                assert float(a @ w) == pytest.approx(float(b @ w), abs=1e-12)

    def test_range_restriction(self, parameter_cases):
        for g, d, ell in parameter_cases:
            assert range_restriction_check(mating_path(g), g)

    def test_range_restriction_rejects_face_reflection(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        bad = MatingPath(
            labels=(LabelMatrix.reflection(0.0),),
            edge_types=(),
            endpoints=(LabelMatrix.reflection(0.0),) * 2,
            closed=False,
        )
        assert not range_restriction_check(bad, g)

    def test_range_restriction_rejects_interior_line(self):
        g = make_wedge(math.pi / 3, math.pi / 3, math.pi / 3)
        bad = MatingPath(
            labels=(LabelMatrix.reflection(g.xi / 2),),
            edge_types=(),
            endpoints=(LabelMatrix.reflection(g.xi / 2),) * 2,
            closed=False,
        )
        assert not range_restriction_check(bad, g)


class TestValidateDensity:
    def test_passes_on_valid_input(self):
        g = make_wedge(math.pi / 4, 3 * math.pi / 8, 3 * math.pi / 8)
        d = admissible_drift(g, 1, 77)
        report = validate_density(g, d, seed=1)
        assert report.passed
        assert report.pde_residual_max <= report.tolerances["pde"]

    def test_detects_perturbation(self):
        g = make_wedge(math.pi / 4, 3 * math.pi / 8, 3 * math.pi / 8)
        d = admissible_drift(g, 1, 78)
        report = validate_density(g, d, seed=1, perturb=(0, 0.01))
        assert not report.passed
        assert max(report.bc1_residual_max, report.bc2_residual_max) > 1e-6
