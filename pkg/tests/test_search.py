"""Enumeration, tuple pipeline, and end-to-end searches on known bodies."""

import math

import numpy as np
import pytest

import polybilliards as pb
from polybilliards.search import (InvalidInput, PreconditionViolation,
                                  SearchOptions, build_closed_line,
                                  build_placement, count_facet_tuples,
                                  double_normal_scan, enumerate_facet_tuples,
                                  evaluate_tuple, propagate_normals,
                                  search_min)
from polybilliards.numerics import solve_placement

S3 = math.sqrt(3.0)


def run(P, **kw):
    kw.setdefault("workers", 1)
    return search_min(P, SearchOptions(**kw))


class TestEnumeration:
    def test_counts_match_formula(self):
        # cumulative over tuple sizes 2..m, one term C(f,j)(j-1)! each
        for f in range(2, 15):
            for m in range(2, 6):
                want = sum(math.comb(f, j) * math.factorial(j - 1)
                           for j in range(2, m + 1))
                assert count_facet_tuples(f, m) == want

    def test_stream_matches_count(self):
        for f, m in ((4, 2), (5, 3), (6, 4), (7, 5)):
            tuples = list(enumerate_facet_tuples(f, m))
            assert len(tuples) == math.comb(f, m) * math.factorial(m - 1)
            assert len(set(tuples)) == len(tuples)

    def test_canonical_rotation(self):
        for t in enumerate_facet_tuples(6, 4):
            assert t[0] == min(t)
            assert len(set(t)) == 4

    def test_every_cyclic_class_once(self):
        seen = set()
        for t in enumerate_facet_tuples(5, 3):
            cls = frozenset((t[i - 1], t[i]) for i in range(3))
            rots = {tuple(t[i:] + t[:i]) for i in range(3)}
            assert not rots & seen
            seen |= rots

    def test_m_larger_than_f_empty(self):
        assert list(enumerate_facet_tuples(3, 4)) == []


class TestPropagation:
    def test_two_antiparallel_normals_close(self):
        U = np.array([[0.0, 1.0], [0.0, -1.0]])
        dirs, mus, closure = propagate_normals(np.array([0.0, 1.0]), U)
        assert closure < 1e-15
        assert np.allclose(dirs[1], [0.0, -1.0])
        assert np.allclose(mus, [2.0, 2.0])

    def test_build_closed_line_square_chord(self):
        D = np.array([[0.0, 1.0], [0.0, -1.0]])
        pts = build_closed_line(D, np.array([1.0, 1.0]))
        assert np.allclose(pts, [[0.0, 0.0], [0.0, 1.0]])

    def test_build_closed_line_rejects_open(self):
        D = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(PreconditionViolation):
            build_closed_line(D, np.array([1.0, 1.0]))

    def test_build_closed_line_rejects_nonpositive_weights(self):
        D = np.array([[0.0, 1.0], [0.0, -1.0]])
        with pytest.raises(PreconditionViolation):
            build_closed_line(D, np.array([1.0, 0.0]))


class TestEvaluateTuple:
    def setup_method(self):
        self.P = pb.builtin("unit_square").polytope

    def test_antiparallel_pair_accepted(self):
        res = evaluate_tuple(self.P, (0, 3))
        assert res.stage == "accepted"
        assert res.trajectory.length() == pytest.approx(2.0, abs=1e-9)
        assert res.rho > 0

    def test_adjacent_pair_rejected_before_placement(self):
        res = evaluate_tuple(self.P, (0, 1))
        assert res.stage in ("rank_U", "kernel_mu")
        assert res.trajectory is None

    def test_bad_tuples_raise(self):
        for t in ((0,), (0, 0), (0, 9), (-1, 2)):
            with pytest.raises(InvalidInput):
                evaluate_tuple(self.P, t)

    def test_build_placement_matches_pipeline(self):
        lp, info = build_placement(self.P, (0, 3))
        rho, lam, s = solve_placement(lp, self.P.tol.scaled(self.P.diameter))
        res = evaluate_tuple(self.P, (0, 3))
        assert lam * info["lamp"].sum() == pytest.approx(res.trajectory.length(),
                                                         abs=1e-9)

    def test_build_placement_none_for_rejected(self):
        assert build_placement(self.P, (0, 1)) is None


class TestKnownBodies:
    def test_square(self):
        rep = run(pb.builtin("unit_square").polytope)
        assert rep.tuples_examined == 14
        assert rep.best_length == pytest.approx(2.0, abs=1e-9)
        assert rep.best.m == 2
        assert rep.best_regular is not None
        assert sum(rep.stage_counts.values()) == rep.tuples_examined

    def test_equilateral_triangle_fagnano(self):
        rep = run(pb.builtin("equilateral_triangle").polytope)
        assert rep.best_length == pytest.approx(1.5, abs=1e-9)
        assert rep.best.m == 3
        assert rep.best_regular_tuple == rep.best_tuple
        # the shortest 2-bounce chord is the height, found by the scan
        assert rep.per_m_best[2]["length"] == pytest.approx(S3, abs=1e-9)
        assert rep.per_m_best[2]["source"] == "scan"

    def test_obtuse_triangle_has_no_regular_orbit(self):
        P = pb.Polytope.from_vertices(np.array([[0.0, 0.0], [4.0, 0.0], [3.8, 0.4]]))
        rep = run(P)
        assert rep.best_regular is None
        assert rep.best_length == pytest.approx(0.8, abs=1e-9)
        assert rep.warnings

    def test_simplex_minimum_per_dimension(self):
        # closed form for the regular simplex of side 1 in R^n
        for n, want in ((2, 1.5), (3, 4.0 / math.sqrt(10.0)),
                        (4, math.sqrt(5.0) / 2.0)):
            rep = run(pb.regular_simplex(n))
            assert rep.best_length == pytest.approx(want, abs=1e-9)
            assert rep.best.m == n + 1
            assert rep.best_regular_tuple == rep.best_tuple

    def test_max_bounces_cap(self):
        rep = run(pb.builtin("equilateral_triangle").polytope, max_bounces=2)
        assert rep.best_length == pytest.approx(S3, abs=1e-9)
        assert rep.tuples_examined == 3


class TestWorkedExamples:
    def test_three_dim_double_normal(self):
        rep = run(pb.builtin("example_a").polytope)
        assert rep.best_length == pytest.approx(1.0, abs=1e-9)
        assert rep.best.m == 2
        ys = sorted(p[1] for p in rep.best.points)
        assert ys[0] == pytest.approx(-0.5, abs=1e-9)
        assert ys[1] == pytest.approx(0.0, abs=1e-9)

    def test_wide_simplex_minimum(self):
        rep = run(pb.builtin("example_b").polytope)
        assert rep.best_length == pytest.approx(16.0 / math.sqrt(5.0), abs=1e-9)
        assert rep.best.m == 2

    def test_prism_fagnano_family(self):
        rep = run(pb.builtin("example_c").polytope)
        assert rep.best_length == pytest.approx(1.5, abs=1e-9)
        assert rep.best_regular is not None
        assert rep.best_regular.length() == pytest.approx(1.5, abs=1e-9)

    def test_vertex_orbit_body(self):
        rep = run(pb.builtin("example_e:0.05").polytope)
        assert rep.best_length == pytest.approx(1.5, abs=1e-6)
        assert rep.best.m == 3
        assert rep.best_regular is not None
        assert rep.best_regular.length() == pytest.approx(1.5, abs=1e-6)

    def test_nonregular_unique_minimizer_body(self):
        rep = run(pb.builtin("example_f:0.05").polytope)
        assert rep.best_length == pytest.approx(S3 - 0.05, abs=1e-6)
        assert rep.per_m_best[2]["source"] == "scan"
        assert rep.best_regular is not None
        assert rep.best_regular.length() > rep.best_length + 1e-3


class TestScan:
    def test_square_scan_finds_both_axis_chords(self):
        P = pb.builtin("unit_square").polytope
        out = double_normal_scan(P)
        lens = sorted(round(e["length"], 9) for e in out)
        assert lens == [2.0, 2.0, 2.0, 2.0]
        for e in out:
            assert e["regular"] in (True, False)
            assert len(e["tuple"]) == 2

    def test_scan_chords_verify(self):
        P = pb.random_polytope(3, 9, seed=400)
        for e in double_normal_scan(P):
            rep = pb.verify_billiard(P, e["trajectory"])
            assert rep.valid_billiard
            assert rep.in_FT


class TestReportInvariants:
    def test_best_is_min_over_per_m(self):
        P = pb.random_polytope(3, 9, seed=456)
        rep = run(P)
        lens = [e["length"] for e in rep.per_m_best.values()]
        assert rep.best_length == pytest.approx(min(lens), abs=1e-12)

    def test_stage_counts_sum_to_examined(self):
        P = pb.random_polytope(3, 8, seed=204)
        rep = run(P)
        assert sum(rep.stage_counts.values()) == rep.tuples_examined

    def test_workers_agree(self):
        P = pb.random_polytope(3, 9, seed=456)
        a, b = run(P, workers=1), run(P, workers=4)
        assert a.best_length == b.best_length
        assert a.best_tuple == b.best_tuple
        assert a.stage_counts == b.stage_counts
        assert np.array_equal(a.best.points, b.best.points)

    def test_backends_agree(self):
        if not pb.NUMBA_AVAILABLE:
            pytest.skip("numba not importable")
        P = pb.random_polytope(3, 8, seed=204)
        try:
            pb.set_backend("numpy")
            a = run(P)
            pb.set_backend("numba")
            b = run(P)
        finally:
            pb.set_backend("numba" if pb.NUMBA_AVAILABLE else "numpy")
        assert a.best_length == b.best_length
        assert np.array_equal(a.best.points, b.best.points)
        assert a.stage_counts == b.stage_counts

    def test_scaling_equivariance(self):
        P = pb.random_polytope(3, 8, seed=204)
        Q = pb.Polytope.from_vertices(7.0 * P.vertices)
        a, b = run(P), run(Q)
        assert b.best_length == pytest.approx(7.0 * a.best_length, rel=1e-9)
        for m in a.per_m_best:
            assert b.per_m_best[m]["length"] == pytest.approx(
                7.0 * a.per_m_best[m]["length"], rel=1e-9)

    def test_accepted_trajectories_all_verify(self):
        P = pb.random_polytope(3, 9, seed=400)
        for m in (2, 3, 4):
            for t in enumerate_facet_tuples(P.n_facets, m):
                res = evaluate_tuple(P, t)
                if res.stage != "accepted":
                    continue
                rep = pb.verify_billiard(P, res.trajectory)
                assert rep.valid_billiard and rep.regular and rep.in_FT
