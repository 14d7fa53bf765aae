"""Convex polytopes with explicit vertex and facet descriptions.

Polytopes are kept in a doubled representation: the vertex list and the
facet halfspaces <u_i, x> <= b_i with unit outward normals.  Conversions in
both directions work by brute-force subset enumeration, which is exact
enough for the moderate sizes this package targets (facet counts in the
tens) and has no special-position blind spots beyond the shared tolerance
profile.
"""

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import (DEFAULT_TOL, InvalidInput, NumericalFailure,
                       ToleranceProfile, matrix_rank, solve_lp)

_ROUND = 8  # decimals used when deduplicating normals, offsets, vertices


def _dedup_rows(rows, decimals=_ROUND):
    seen = set()
    out = []
    for r in rows:
        key = tuple(np.round(np.asarray(r, dtype=np.float64), decimals))
        # round() can emit -0.0 which hashes apart from 0.0
        key = tuple(0.0 if v == 0.0 else v for v in key)
        if key not in seen:
            seen.add(key)
            out.append(np.asarray(r, dtype=np.float64))
    return out


@dataclass(eq=False)
class Polytope:
    """Bounded full-dimensional convex polytope in R^n.

    vertices: K x n array of extreme points
    normals:  F x n array of unit outward facet normals
    offsets:  F array with facet i the set {x : <normals[i], x> = offsets[i]}
    """
    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    tol: ToleranceProfile = field(default=DEFAULT_TOL)

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    @property
    def n_facets(self) -> int:
        return int(self.normals.shape[0])

    @cached_property
    def diameter(self) -> float:
        V = self.vertices
        d = 0.0
        for i in range(V.shape[0]):
            dd = np.linalg.norm(V[i + 1:] - V[i], axis=1)
            if dd.size:
                d = max(d, float(np.max(dd)))
        return d

    @cached_property
    def scale(self) -> float:
        return max(1.0, self.diameter,
                   float(np.max(np.abs(self.offsets))) if self.offsets.size else 1.0)

    # -- membership and incidence -------------------------------------

    def facet_slacks(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=np.float64)
        return self.offsets - self.normals @ p

    def contains(self, point, slack: float = 0.0) -> bool:
        return bool(np.min(self.facet_slacks(point)) >= slack - self.tol.feas * self.scale)

    def active_facets(self, point):
        """Indices of facets whose hyperplane passes through the point."""
        s = np.abs(self.facet_slacks(point))
        return [int(i) for i in np.nonzero(s <= self.tol.feas * self.scale)[0]]

    def normal_cone_generators(self, point) -> np.ndarray:
        """Outward normals of the facets active at a boundary point."""
        act = self.active_facets(point)
        if not act:
            raise InvalidInput("point is not on the boundary")
        return self.normals[act]

    def incident_vertices(self, facet: int):
        s = np.abs(self.offsets[facet] - self.vertices @ self.normals[facet])
        return [int(i) for i in np.nonzero(s <= self.tol.feas * self.scale)[0]]

    def on_boundary(self, point) -> bool:
        return self.contains(point) and len(self.active_facets(point)) > 0

    # -- derived geometry ----------------------------------------------

    def interior_point(self) -> np.ndarray:
        """Deepest point (Chebyshev center) via an LP over (x+, x-, r)."""
        n = self.dim
        f = self.n_facets
        A = np.zeros((f, 2 * n + 1 + f))
        b = np.zeros(f)
        for i in range(f):
            A[i, :n] = self.normals[i]
            A[i, n:2 * n] = -self.normals[i]
            A[i, 2 * n] = 1.0
            A[i, 2 * n + 1 + i] = 1.0
            b[i] = self.offsets[i]
        c = np.zeros(2 * n + 1 + f)
        c[2 * n] = 1.0
        status, x, value = solve_lp(A, b, c, self.tol)
        if status != "optimal":
            raise NumericalFailure(f"interior point LP came back {status}")
        if value <= self.tol.feas * self.scale:
            raise InvalidInput("polytope has empty interior")
        return np.asarray(x[:n] - x[n:2 * n])

    def dihedral_angles(self):
        """(i, j, angle) for each adjacent facet pair, i < j.

        Adjacency means the shared incident vertices span an (n-2)-face.
        The angle is measured inside the body: pi - arccos(<u_i, u_j>).
        """
        n = self.dim
        incid = [self.incident_vertices(i) for i in range(self.n_facets)]
        out = []
        for i in range(self.n_facets):
            for j in range(i + 1, self.n_facets):
                shared = sorted(set(incid[i]) & set(incid[j]))
                if len(shared) < max(1, n - 1):
                    continue
                pts = self.vertices[shared]
                if len(shared) > 1:
                    if matrix_rank(pts[1:] - pts[0], self.tol) < n - 2:
                        continue
                cosang = float(np.clip(self.normals[i] @ self.normals[j], -1.0, 1.0))
                out.append((i, j, float(np.pi - np.arccos(cosang))))
        return out

    def is_acute(self) -> bool:
        """True when every dihedral angle is strictly below a right angle."""
        return all(ang < np.pi / 2.0 - self.tol.feas
                   for _, _, ang in self.dihedral_angles())

    def can_translate_into_interior(self, points, min_margin: float = None):
        """Whether some translate of the point set fits strictly inside.

        Solves max delta s.t. <u_i, p_j + t> + delta <= b_i for all i, j
        with t free.  Returns (flag, delta, t); flag is True when the best
        margin exceeds the feasibility tolerance (or ``min_margin``).
        """
        P = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = self.dim
        f = self.n_facets
        m = P.shape[0]
        if P.shape[1] != n:
            raise InvalidInput("points dimension disagrees with the polytope")
        rows = f * m
        A = np.zeros((rows, 1 + 2 * n + rows))
        b = np.zeros(rows)
        r = 0
        for j in range(m):
            for i in range(f):
                A[r, 0] = 1.0
                A[r, 1:1 + n] = self.normals[i]
                A[r, 1 + n:1 + 2 * n] = -self.normals[i]
                A[r, 1 + 2 * n + r] = 1.0
                b[r] = self.offsets[i] - self.normals[i] @ P[j]
                r += 1
        c = np.zeros(1 + 2 * n + rows)
        c[0] = 1.0
        status, x, value = solve_lp(A, b, c, self.tol)
        if status == "infeasible":
            return False, 0.0, None
        if status != "optimal":
            raise NumericalFailure(f"translation LP came back {status}")
        t = np.asarray(x[1:1 + n] - x[1 + n:1 + 2 * n])
        cut = self.tol.feas * self.scale if min_margin is None else min_margin
        return bool(value > cut), float(value), t

    # -- serialization ---------------------------------------------------

    def to_dict(self, name: str = None):
        data = {
            "dim": self.dim,
            "vertices": [[float(v) for v in row] for row in self.vertices],
            "halfspaces": [
                {"normal": [float(v) for v in u], "offset": float(b)}
                for u, b in zip(self.normals, self.offsets)
            ],
        }
        if name is not None:
            data["name"] = name
        return data

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @staticmethod
    def from_dict(data, tol: ToleranceProfile = DEFAULT_TOL) -> "Polytope":
        if not isinstance(data, dict):
            raise InvalidInput("polytope JSON must be an object")
        want_dim = data.get("dim")
        def _checked(P):
            if want_dim is not None and int(want_dim) != P.dim:
                raise InvalidInput(
                    f"declared dim {want_dim} != coordinate dim {P.dim}")
            return P
        if data.get("vertices"):
            P = Polytope.from_vertices(np.asarray(data["vertices"], dtype=np.float64), tol)
            if data.get("halfspaces") and len(data["halfspaces"]) != P.n_facets:
                raise InvalidInput(
                    "facet list disagrees with the hull of the given vertices")
            return _checked(P)
        if data.get("halfspaces"):
            try:
                normals = np.asarray(
                    [h["normal"] for h in data["halfspaces"]], dtype=np.float64)
                offsets = np.asarray(
                    [h["offset"] for h in data["halfspaces"]], dtype=np.float64)
            except (KeyError, TypeError) as err:
                raise InvalidInput(f"malformed halfspace entry: {err}") from err
            return _checked(Polytope.from_halfspaces(normals, offsets, tol))
        raise InvalidInput("polytope JSON needs vertices or halfspaces")

    @staticmethod
    def from_json(text: str, tol: ToleranceProfile = DEFAULT_TOL) -> "Polytope":
        return Polytope.from_dict(json.loads(text), tol)

    # -- construction ----------------------------------------------------

    @staticmethod
    def from_vertices(vertices, tol: ToleranceProfile = DEFAULT_TOL) -> "Polytope":
        """Convex hull by hyperplane enumeration over vertex n-subsets."""
        V = np.asarray(vertices, dtype=np.float64)
        if V.ndim != 2:
            raise InvalidInput("vertices must be a 2-dimensional array")
        if not np.all(np.isfinite(V)):
            raise InvalidInput("vertices contain non-finite entries")
        V = np.array(_dedup_rows(V))
        k, n = V.shape
        if n < 2:
            raise InvalidInput("dimension must be at least 2")
        if k < n + 1:
            raise InvalidInput("need at least dim + 1 distinct vertices")
        if matrix_rank(V[1:] - V[0], tol) < n:
            raise InvalidInput("vertex set is not full-dimensional")
        scale = max(1.0, float(np.max(np.abs(V))))
        planes = []
        for subset in itertools.combinations(range(k), n):
            pts = V[list(subset)]
            D = pts[1:] - pts[0]
            sv = np.linalg.svd(D)
            s = sv[1]
            if s.size and s[0] > 0.0 and np.sum(
                    s > tol.rank_rel * s[0] * n) != n - 1:
                continue
            u = sv[2][n - 1]
            b = float(u @ pts[0])
            h = V @ u - b
            hi = float(np.max(h))
            lo = float(np.min(h))
            eps = tol.feas * scale * 10.0
            if hi <= eps:
                planes.append((u, b))
            elif lo >= -eps:
                planes.append((-u, -b))
            else:
                continue
        # orient so offsets follow unit outward normals, then dedup
        cand = []
        for u, b in planes:
            nu = float(np.linalg.norm(u))
            if nu <= 0.0:
                continue
            cand.append(np.concatenate([u / nu, [b / nu]]))
        cand = _dedup_rows(cand)
        if not cand:
            raise InvalidInput("vertex set produced no supporting hyperplanes")
        cand.sort(key=lambda row: tuple(np.round(row, _ROUND)))
        normals = np.array([c[:-1] for c in cand])
        offsets = np.array([c[-1] for c in cand])
        # keep genuine facets: incident vertices must span dimension n-1
        keep = []
        for i in range(normals.shape[0]):
            inc = np.nonzero(np.abs(V @ normals[i] - offsets[i])
                             <= tol.feas * scale * 10.0)[0]
            if len(inc) < n:
                continue
            pts = V[inc]
            if matrix_rank(pts[1:] - pts[0], tol) == n - 1:
                keep.append(i)
        normals = normals[keep]
        offsets = offsets[keep]
        if normals.shape[0] < n + 1:
            raise InvalidInput("vertex set is degenerate (too few facets)")
        # hull semantics: drop input points that are not extreme
        extreme = []
        for i in range(k):
            act = np.nonzero(np.abs(normals @ V[i] - offsets)
                             <= tol.feas * scale * 10.0)[0]
            if len(act) >= n and matrix_rank(normals[act], tol) == n:
                extreme.append(i)
        V = V[extreme]
        if V.shape[0] < n + 1:
            raise InvalidInput("vertex set is degenerate (too few extreme points)")
        V = np.array(sorted(V, key=lambda row: tuple(np.round(row, _ROUND))))
        return Polytope(V, normals, offsets, tol)

    @staticmethod
    def from_halfspaces(normals, offsets, tol: ToleranceProfile = DEFAULT_TOL) -> "Polytope":
        """Vertex enumeration over halfspace n-subsets, with validation."""
        U = np.asarray(normals, dtype=np.float64)
        b = np.asarray(offsets, dtype=np.float64)
        if U.ndim != 2 or b.ndim != 1 or U.shape[0] != b.shape[0]:
            raise InvalidInput("normals must be F x n with F offsets")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(b))):
            raise InvalidInput("halfspace data contains non-finite entries")
        norms = np.linalg.norm(U, axis=1)
        if np.any(norms <= 0.0):
            raise InvalidInput("zero facet normal")
        U = U / norms[:, None]
        b = b / norms
        rows = _dedup_rows(np.column_stack([U, b]))
        rows.sort(key=lambda row: tuple(np.round(row, _ROUND)))
        U = np.array([r[:-1] for r in rows])
        b = np.array([r[-1] for r in rows])
        f, n = U.shape
        if n < 2:
            raise InvalidInput("dimension must be at least 2")
        if f < n + 1:
            raise InvalidInput("need at least dim + 1 halfspaces")
        # boundedness: the recession cone {d : U d <= 0} must be {0}
        for k in range(n):
            for sign in (1.0, -1.0):
                if Polytope._recession_extent(U, k, sign, tol) > tol.feas * 10.0:
                    raise InvalidInput("halfspace intersection is unbounded")
        scale = max(1.0, float(np.max(np.abs(b))))
        verts = []
        for subset in itertools.combinations(range(f), n):
            Us = U[list(subset)]
            sv = np.linalg.svd(Us)[1]
            if sv[0] <= 0.0 or np.sum(sv > tol.rank_rel * sv[0] * n) != n:
                continue
            x = np.linalg.solve(Us, b[list(subset)])
            if float(np.max(U @ x - b)) <= tol.feas * scale * 10.0:
                verts.append(x)
        verts = _dedup_rows(verts)
        if len(verts) < n + 1:
            raise InvalidInput("halfspace intersection has empty interior")
        V = np.array(sorted(verts, key=lambda row: tuple(np.round(row, _ROUND))))
        if matrix_rank(V[1:] - V[0], tol) < n:
            raise InvalidInput("halfspace intersection is not full-dimensional")
        # drop redundant halfspaces: facets carry an (n-1)-dimensional face
        keep = []
        for i in range(f):
            inc = np.nonzero(np.abs(V @ U[i] - b[i]) <= tol.feas * scale * 10.0)[0]
            if len(inc) < n:
                continue
            pts = V[inc]
            if matrix_rank(pts[1:] - pts[0], tol) == n - 1:
                keep.append(i)
        if len(keep) < n + 1:
            raise InvalidInput("halfspace intersection has empty interior")
        P = Polytope(V, U[keep], b[keep], tol)
        P.interior_point()  # raises when the interior is empty
        return P

    def _check_vertices_extreme(self):
        """Every stored vertex must have n active facets of full rank."""
        for i in range(self.vertices.shape[0]):
            act = self.active_facets(self.vertices[i])
            if len(act) < self.dim or matrix_rank(self.normals[act], self.tol) < self.dim:
                raise InvalidInput(
                    f"point {self.vertices[i]} is not an extreme point")

    @staticmethod
    def _recession_extent(U, coord, sign, tol) -> float:
        """max sign * d[coord] over {U d <= 0, -1 <= d <= 1}."""
        f, n = U.shape
        # variables: d+ (n), d- (n), cone slacks (f), box slacks (2n)
        rows = f + 2 * n
        cols = 2 * n + f + 2 * n
        A = np.zeros((rows, cols))
        rhs = np.zeros(rows)
        for i in range(f):
            A[i, :n] = U[i]
            A[i, n:2 * n] = -U[i]
            A[i, 2 * n + i] = 1.0
        for k in range(2 * n):
            A[f + k, k] = 1.0
            A[f + k, 2 * n + f + k] = 1.0
            rhs[f + k] = 1.0
        c = np.zeros(cols)
        c[coord] = sign
        c[n + coord] = -sign
        status, x, value = solve_lp(A, rhs, c, tol)
        if status != "optimal":
            raise NumericalFailure(f"recession LP came back {status}")
        return float(value)


@dataclass(eq=False)
class Trajectory:
    """Closed polygonal line given by its ordered bounce points (m x n)."""
    points: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if not np.all(np.isfinite(P)):
            raise InvalidInput("trajectory contains non-finite points")
        if P.shape[0] < 2:
            raise InvalidInput("a closed trajectory needs at least 2 points")
        self.points = P

    @property
    def m(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def segments(self) -> np.ndarray:
        return np.roll(self.points, -1, axis=0) - self.points

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segments(), axis=1)

    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def directions(self) -> np.ndarray:
        """Unit direction of each segment; raises on a zero segment."""
        seg = self.segments()
        ln = np.linalg.norm(seg, axis=1)
        if np.any(ln <= 0.0):
            raise InvalidInput("trajectory has coincident consecutive points")
        return seg / ln[:, None]

    def to_dict(self):
        return {"points": [[float(v) for v in row] for row in self.points]}

    @staticmethod
    def from_dict(data) -> "Trajectory":
        if "points" not in data:
            raise InvalidInput("trajectory JSON needs a 'points' list")
        return Trajectory(np.asarray(data["points"], dtype=np.float64))
