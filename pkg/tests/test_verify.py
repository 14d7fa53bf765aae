"""Verifier tests: reflection law, regularity, F(T) membership, minimality."""

import math

import numpy as np
import pytest

import polybilliards as pb
from polybilliards.geometry import Polytope, Trajectory
from polybilliards.verify import (InvalidInput, PreconditionViolation,
                                  check_minimality_conditions, is_regular,
                                  translate_to_nonregular, verify_billiard)

SQUARE = Polytope.from_vertices(np.array([[0.0, 0.0], [1.0, 0.0],
                                          [1.0, 1.0], [0.0, 1.0]]))
CHORD = np.array([[0.5, 0.0], [0.5, 1.0]])
# orthic triangle of the side-1 equilateral triangle with base on the x-axis
FAGNANO = np.array([[0.5, 0.0],
                    [0.75, math.sqrt(3.0) / 4.0],
                    [0.25, math.sqrt(3.0) / 4.0]])
TRIANGLE = pb.builtin("equilateral_triangle").polytope


class TestValidBilliards:
    def test_square_chord(self):
        rep = verify_billiard(SQUARE, CHORD)
        assert rep.valid_billiard and rep.regular and rep.in_FT
        assert rep.theorem1_ok is True
        assert rep.length == pytest.approx(2.0)
        assert [e["active"] for e in rep.per_point] == [[1], [2]]

    def test_fagnano_orbit(self):
        rep = verify_billiard(TRIANGLE, FAGNANO)
        assert rep.valid_billiard and rep.regular and rep.in_FT
        assert rep.theorem1_ok is True
        assert rep.length == pytest.approx(1.5, abs=1e-12)

    def test_diamond_orbit_valid_but_not_minimal(self):
        # 4-bounce orbit of the square: valid, yet 4 points cannot span
        # a 3-dimensional hull in the plane
        diamond = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]])
        rep = verify_billiard(SQUARE, diamond)
        assert rep.valid_billiard and rep.regular
        assert rep.theorem1_ok is False
        assert rep.length == pytest.approx(2.0 * math.sqrt(2.0))

    def test_accepts_trajectory_objects(self):
        rep = verify_billiard(SQUARE, Trajectory(CHORD))
        assert rep.valid_billiard

    def test_report_serializes(self):
        import json
        json.dumps(verify_billiard(SQUARE, CHORD).to_dict())


class TestInvalidBilliards:
    def test_oblique_chord_breaks_reflection_law(self):
        rep = verify_billiard(SQUARE, np.array([[0.3, 0.0], [0.7, 1.0]]))
        assert not rep.valid_billiard
        assert any("reflection law" in s for s in rep.notes)

    def test_interior_point_rejected(self):
        rep = verify_billiard(SQUARE, np.array([[0.5, 0.0], [0.5, 0.5]]))
        assert not rep.valid_billiard
        assert any("interior" in s for s in rep.notes)

    def test_outside_point_rejected(self):
        rep = verify_billiard(SQUARE, np.array([[0.5, 0.0], [0.5, 1.4]]))
        assert not rep.valid_billiard

    def test_collinear_point_rejected(self):
        pts = np.array([[0.2, 0.0], [0.5, 0.0], [0.8, 0.0]])
        rep = verify_billiard(SQUARE, pts)
        assert not rep.valid_billiard
        assert any("chord of its neighbors" in s for s in rep.notes)

    def test_coincident_points_raise(self):
        with pytest.raises(InvalidInput):
            verify_billiard(SQUARE, np.array([[0.5, 0.0], [0.5, 0.0]]))

    def test_single_point_raises(self):
        with pytest.raises(InvalidInput):
            verify_billiard(SQUARE, np.array([[0.5, 0.0]]))

    def test_dimension_mismatch_raises(self):
        with pytest.raises(InvalidInput):
            verify_billiard(SQUARE, np.array([[0.5, 0.0, 0.0], [0.5, 1.0, 0.0]]))

    def test_tangential_slide_beyond_corner_invalid(self):
        rep = verify_billiard(SQUARE, CHORD + np.array([0.6, 0.0]))
        assert not rep.valid_billiard


class TestRegularity:
    def test_chord_regular(self):
        assert is_regular(SQUARE, CHORD)

    def test_corner_not_regular(self):
        assert not is_regular(SQUARE, np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_interior_point_raises(self):
        with pytest.raises(PreconditionViolation):
            is_regular(SQUARE, np.array([[0.5, 0.5]]))

    def test_vertex_orbit_flagged_nonregular(self):
        fix = pb.builtin("example_e:0.05")
        flags = [r.expected_regular for r in fix.reference_trajectories]
        assert flags == [False, True, False]
        for ref in fix.reference_trajectories:
            rep = verify_billiard(fix.polytope, ref.trajectory())
            assert rep.valid_billiard
            assert rep.regular is ref.expected_regular


class TestFTMembership:
    def test_spanning_chord_in_ft(self):
        assert verify_billiard(SQUARE, CHORD).in_FT

    def test_width_chord_of_obtuse_triangle_in_ft(self):
        P = Polytope.from_vertices(np.array([[0.0, 0.0], [4.0, 0.0], [3.8, 0.4]]))
        rep = pb.search_min(P, pb.SearchOptions(workers=1))
        out = verify_billiard(P, rep.best)
        assert out.valid_billiard and out.in_FT
        assert out.length == pytest.approx(0.8, abs=1e-9)

    def test_translatable_pair_not_in_ft(self):
        flag, delta, t = SQUARE.can_translate_into_interior(
            np.array([[0.2, 0.0], [0.4, 0.0]]))
        assert flag and delta > 0.1


class TestMinimality:
    def test_fagnano_passes_both_conditions(self):
        dimv, cone, details = check_minimality_conditions(TRIANGLE, FAGNANO)
        assert dimv and cone
        assert details["dimV"] == 2
        assert details["cone_dims"] == [1, 1, 1]

    def test_diamond_fails_dimension(self):
        diamond = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]])
        dimv, cone, details = check_minimality_conditions(SQUARE, diamond)
        assert not dimv
        assert details["dimV"] == 2 and details["m"] == 4

    def test_requires_valid_trajectory(self):
        with pytest.raises(PreconditionViolation):
            check_minimality_conditions(SQUARE, np.array([[0.3, 0.0], [0.7, 1.0]]))


class TestTranslateToNonregular:
    def test_square_chord_slides_to_corner(self):
        moved = translate_to_nonregular(SQUARE, CHORD)
        rep = verify_billiard(SQUARE, moved)
        assert rep.valid_billiard and not rep.regular
        assert rep.length == pytest.approx(2.0)
        xs = moved.points[:, 0]
        assert np.allclose(xs, xs[0])
        assert min(abs(xs[0]), abs(xs[0] - 1.0)) < 1e-9

    def test_three_dim_reference(self):
        fix = pb.builtin("example_a")
        moved = translate_to_nonregular(fix.polytope, fix.reference_trajectories[0].trajectory())
        rep = verify_billiard(fix.polytope, moved)
        assert rep.valid_billiard and not rep.regular
        assert rep.length == pytest.approx(1.0, abs=1e-9)

    def test_rejects_spanning_orbit(self):
        with pytest.raises(PreconditionViolation):
            translate_to_nonregular(TRIANGLE, FAGNANO)

    def test_rejects_nonregular_input(self):
        corner = translate_to_nonregular(SQUARE, CHORD)
        with pytest.raises(PreconditionViolation):
            translate_to_nonregular(SQUARE, corner)


class TestInvariances:
    def test_translation_invariance(self):
        t = np.array([5.0, -3.0])
        Q = Polytope.from_vertices(SQUARE.vertices + t)
        a = verify_billiard(SQUARE, CHORD)
        b = verify_billiard(Q, CHORD + t)
        assert (a.valid_billiard, a.regular, a.in_FT, a.theorem1_ok) == \
               (b.valid_billiard, b.regular, b.in_FT, b.theorem1_ok)
        assert a.length == pytest.approx(b.length)

    def test_scaling_invariance_of_flags(self):
        Q = Polytope.from_vertices(100.0 * TRIANGLE.vertices)
        rep = verify_billiard(Q, 100.0 * FAGNANO)
        assert rep.valid_billiard and rep.regular and rep.theorem1_ok
        assert rep.length == pytest.approx(150.0, abs=1e-7)
