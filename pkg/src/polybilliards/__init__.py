"""Shortest closed billiard trajectories in convex polytopes.

Given a bounded convex polytope in R^n as an intersection of half-spaces,
the search enumerates ordered facet tuples, solves a cone-ball maximization
for the bounce directions and a placement linear program for the bounce
points, and returns the shortest closed polygonal line satisfying the
reflection law.  A separate verifier checks arbitrary candidate closed
lines against the same optimality conditions.
"""

from . import _kernels
from ._kernels import NUMBA_AVAILABLE, set_backend
from .fixtures import (Fixture, ReferenceTrajectory, brute_force_min_2d,
                       builtin, random_polytope, random_polytope_with_facets,
                       regular_simplex)
from .geometry import Polytope, Trajectory
from .numerics import (DEFAULT_TOL, ConeBallProblem, InvalidInput,
                       NumericalFailure, PlacementLP, PreconditionViolation,
                       ToleranceProfile, fixed_subspace,
                       max_linear_over_cone_ball, positive_kernel,
                       project_polyhedral_cone, solve_lp, solve_placement)
from .search import (CandidateResult, SearchOptions, SearchReport,
                     count_facet_tuples, double_normal_scan,
                     enumerate_facet_tuples, evaluate_tuple, search_min)
from .verify import (VerificationReport, check_minimality_conditions,
                     is_regular, translate_to_nonregular, verify_billiard)

__version__ = "1.0.0"

__all__ = [
    "CandidateResult",
    "ConeBallProblem",
    "DEFAULT_TOL",
    "Fixture",
    "InvalidInput",
    "NUMBA_AVAILABLE",
    "NumericalFailure",
    "PlacementLP",
    "Polytope",
    "PreconditionViolation",
    "ReferenceTrajectory",
    "SearchOptions",
    "SearchReport",
    "ToleranceProfile",
    "Trajectory",
    "VerificationReport",
    "brute_force_min_2d",
    "builtin",
    "check_minimality_conditions",
    "count_facet_tuples",
    "double_normal_scan",
    "enumerate_facet_tuples",
    "evaluate_tuple",
    "fixed_subspace",
    "is_regular",
    "max_linear_over_cone_ball",
    "positive_kernel",
    "project_polyhedral_cone",
    "random_polytope",
    "random_polytope_with_facets",
    "regular_simplex",
    "search_min",
    "set_backend",
    "solve_lp",
    "solve_placement",
    "translate_to_nonregular",
    "verify_billiard",
]
