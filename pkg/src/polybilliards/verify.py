"""Independent validation of candidate closed billiard trajectories.

Nothing here trusts the search pipeline: every check recomputes directions,
active facet sets, and cone memberships straight from the polytope and the
raw point list.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Polytope, Trajectory
from .numerics import (DEFAULT_TOL, InvalidInput, NumericalFailure,
                       PreconditionViolation, ToleranceProfile, matrix_rank,
                       nonneg_lstsq, solve_lp)


@dataclass
class VerificationReport:
    """Outcome of all trajectory checks against one polytope.

    per_point[j] records, for the bounce at p_j: the active facet indices,
    the residual of expressing n_{j-1} - n_j as a nonnegative combination of
    the active normals, the outgoing segment length, and the outgoing unit
    direction.  theorem1_ok stays None when the trajectory is not a valid
    billiard trajectory (the minimality conditions presume one).
    """
    valid_billiard: bool
    regular: bool
    in_FT: bool
    theorem1_ok: object
    length: float
    per_point: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "valid_billiard": bool(self.valid_billiard),
            "regular": bool(self.regular),
            "in_FT": bool(self.in_FT),
            "theorem1_ok": None if self.theorem1_ok is None else bool(self.theorem1_ok),
            "length": float(self.length),
            "per_point": self.per_point,
            "notes": list(self.notes),
        }


def _reflection_residual(P: Polytope, point, diff, tol: ToleranceProfile):
    """Residual of diff as a nonnegative combination of active normals."""
    act = P.active_facets(point)
    if not act:
        return act, float(np.linalg.norm(diff))
    G = np.ascontiguousarray(P.normals[act].T)
    _, rnorm = nonneg_lstsq(G, np.asarray(diff, dtype=np.float64))
    return act, rnorm


def verify_billiard(P: Polytope, points, tol: ToleranceProfile = None) -> VerificationReport:
    """Check a closed polygonal line against the reflection-law definition.

    valid_billiard requires: all points on the boundary, pairwise distinct,
    no point on the segment between its cyclic neighbors, and at every point
    the direction change n_{j-1} - n_j lying in the outward normal cone.
    """
    base_tol = tol or P.tol
    tol = base_tol.scaled(P.diameter)
    traj = points if isinstance(points, Trajectory) else Trajectory(np.asarray(points))
    pts = traj.points
    m = traj.m
    if m < 2:
        raise InvalidInput("need at least 2 bouncing points")
    if pts.shape[1] != P.dim:
        raise InvalidInput("trajectory dimension disagrees with the polytope")
    seg = traj.segments()
    seglen = np.linalg.norm(seg, axis=1)
    if np.any(seglen <= tol.feas):
        raise InvalidInput("coincident consecutive points")
    dirs = seg / seglen[:, None]
    length = float(np.sum(seglen))

    notes = []
    ok = True

    for i in range(m):
        for j in range(i + 1, m):
            if np.linalg.norm(pts[i] - pts[j]) <= tol.feas:
                ok = False
                notes.append(f"points {i} and {j} coincide")

    on_boundary = True
    for j in range(m):
        if not P.contains(pts[j]):
            ok = False
            on_boundary = False
            notes.append(f"point {j} lies outside the polytope")
        elif not P.active_facets(pts[j]):
            ok = False
            on_boundary = False
            notes.append(f"point {j} lies in the interior")

    # Definition: p_j must not sit on the segment p_{j-1} p_{j+1}
    for j in range(m):
        a = pts[(j - 1) % m]
        b = pts[(j + 1) % m]
        defect = (np.linalg.norm(a - pts[j]) + np.linalg.norm(pts[j] - b)
                  - np.linalg.norm(a - b))
        if defect <= tol.feas:
            ok = False
            notes.append(f"point {j} lies on the chord of its neighbors")

    per_point = []
    for j in range(m):
        diff = dirs[(j - 1) % m] - dirs[j]
        if on_boundary:
            act, resid = _reflection_residual(P, pts[j], diff, tol)
        else:
            act, resid = P.active_facets(pts[j]), float("nan")
        thr = tol.feas * max(1.0, float(np.linalg.norm(diff)))
        if not (resid <= thr):
            ok = False
            notes.append(f"reflection law fails at point {j} (residual {resid:.3e})")
        per_point.append({
            "active": [int(a) for a in act],
            "residual": float(resid) if np.isfinite(resid) else None,
            "lam": float(seglen[j]),
            "direction": [float(v) for v in dirs[j]],
        })

    regular = on_boundary and all(len(e["active"]) == 1 for e in per_point)
    translatable, delta, _ = P.can_translate_into_interior(pts)
    in_ft = not translatable

    theorem1 = None
    if ok:
        dimv_ok, cone_ok, _ = check_minimality_conditions(P, traj, base_tol, _checked=True)
        theorem1 = bool(dimv_ok and cone_ok)

    return VerificationReport(valid_billiard=ok, regular=regular, in_FT=in_ft,
                              theorem1_ok=theorem1, length=length,
                              per_point=per_point, notes=notes)


def is_regular(P: Polytope, points, tol: ToleranceProfile = None) -> bool:
    """True when every bouncing point touches exactly one facet."""
    tol = (tol or P.tol).scaled(P.diameter)
    pts = points.points if isinstance(points, Trajectory) else np.atleast_2d(
        np.asarray(points, dtype=np.float64))
    for j in range(pts.shape[0]):
        if not P.contains(pts[j]):
            raise PreconditionViolation(f"point {j} is off the boundary")
        act = P.active_facets(pts[j])
        if not act:
            raise PreconditionViolation(f"point {j} is off the boundary")
        if len(act) != 1:
            return False
    return True


def check_minimality_conditions(P: Polytope, trajectory, tol: ToleranceProfile = None,
                                _checked: bool = False):
    """Dimension conditions satisfied by every length minimizer.

    Returns (dimV_ok, cone_dim_ok, details).  dimV_ok: the affine hull of
    the m bouncing points has dimension exactly m - 1.  cone_dim_ok: at each
    bouncing point, the normal cone intersected with the hull's direction
    space V_0 has a one-dimensional linear span.  The intersection cone is
    {G c : c >= 0, W G c = 0} with G the active normals and W a basis of the
    orthogonal complement of V_0; its span is G_S null(W G_S) over the
    support S of the feasible c.
    """
    base_tol = tol or P.tol
    tol = base_tol.scaled(P.diameter)
    traj = trajectory if isinstance(trajectory, Trajectory) else Trajectory(
        np.asarray(trajectory))
    if not _checked:
        rep = verify_billiard(P, traj, base_tol)
        if not rep.valid_billiard:
            raise PreconditionViolation(
                "minimality conditions require a valid billiard trajectory")
    pts = traj.points
    m, n = pts.shape
    centered = pts[1:] - pts[0]
    dimv = matrix_rank(centered, tol)
    dimv_ok = dimv == m - 1

    # orthonormal rows spanning the complement of the hull direction space
    _, s, vt = np.linalg.svd(centered)
    W = vt[dimv:] if dimv < n else np.zeros((0, n))

    cone_dims = []
    for j in range(m):
        act = P.active_facets(pts[j])
        G = P.normals[act].T  # n x k
        k = G.shape[1]
        if W.shape[0] == 0:
            support = list(range(k))
            nullbasis = np.eye(k)
        else:
            M = W @ G  # w x k
            support = []
            for gidx in range(k):
                # feasibility of {c >= 0, M c = 0, c_gidx = 1}
                A = np.vstack([M, np.eye(k)[gidx]])
                b = np.zeros(A.shape[0])
                b[-1] = 1.0
                status, _, _ = solve_lp(A, b, np.zeros(k), tol)
                if status == "optimal":
                    support.append(gidx)
            if support:
                Ms = np.ascontiguousarray(M[:, support])
                # W has orthonormal rows and G unit columns, so the natural
                # scale of Ms is 1; a cutoff relative to the largest singular
                # value would promote 1e-16 noise to full rank
                _, sv, vts = np.linalg.svd(Ms, full_matrices=True)
                rank = int(np.sum(sv > tol.rank_rel * max(1.0, sv[0] if sv.size else 0.0)))
                nullbasis = vts[rank:].T
            else:
                nullbasis = np.zeros((0, 0))
        if not support or nullbasis.shape[1] == 0:
            cone_dims.append(0)
            continue
        span = G[:, support] @ nullbasis
        cone_dims.append(matrix_rank(span, tol))
    cone_ok = all(d == 1 for d in cone_dims)
    details = {"dimV": int(dimv), "m": int(m), "cone_dims": cone_dims}
    return dimv_ok, cone_ok, details


def translate_to_nonregular(P: Polytope, trajectory, tol: ToleranceProfile = None) -> Trajectory:
    """Slide a regular trajectory along its bounce hyperplanes to a corner.

    The translation direction is orthogonal to every bounce facet normal, so
    points stay on their hyperplanes and the reflection law is untouched;
    the step is the smallest ray parameter at which some point picks up an
    additional active facet.  Requires a regular trajectory with at most
    dim-many bouncing points.
    """
    base_tol = tol or P.tol
    tol = base_tol.scaled(P.diameter)
    traj = trajectory if isinstance(trajectory, Trajectory) else Trajectory(
        np.asarray(trajectory))
    pts = traj.points
    m, n = pts.shape
    if m > n:
        raise PreconditionViolation(
            f"translation needs at most {n} bouncing points, got {m}")
    if not is_regular(P, traj, base_tol):
        raise PreconditionViolation("trajectory is not regular")
    rows = []
    for j in range(m):
        act = P.active_facets(pts[j])
        rows.append(P.normals[act[0]])
    U = np.ascontiguousarray(np.array(rows))
    basis = np.asarray(_kernels.nullspace_svd(U, tol.rank_rel))
    if basis.shape[1] == 0:
        raise NumericalFailure("bounce hyperplanes have no common direction")
    d = basis[:, 0]

    for ray in (d, -d):
        growth = P.normals @ ray
        step = None
        for j in range(m):
            slack = P.facet_slacks(pts[j])
            for i in range(P.n_facets):
                if slack[i] <= tol.feas:
                    continue  # already active
                if growth[i] > tol.positivity:
                    t = float(slack[i] / growth[i])
                    if step is None or t < step:
                        step = t
        if step is None:
            continue
        moved = Trajectory(pts + step * ray)
        rep = verify_billiard(P, moved, base_tol)
        if rep.valid_billiard and not rep.regular:
            return moved
    raise NumericalFailure("no bounded translation reached a non-regular position")
