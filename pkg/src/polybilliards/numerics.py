"""Tolerance-aware linear algebra and optimization primitives.

All geometric decisions downstream (rank filters, cone memberships, LP
feasibility) funnel through this module so that every tolerance has one
owner.  The heavy lifting lives in :mod:`polybilliards._kernels`; this module
adds input validation, the dataclass problem descriptions, and the
exception vocabulary.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


class InvalidInput(ValueError):
    """Raised when arguments are malformed (shape, finiteness, domain)."""


class PreconditionViolation(ValueError):
    """Raised when a documented precondition of an operation fails."""


class NumericalFailure(RuntimeError):
    """Raised when an iterative routine cannot certify its result."""


@dataclass(frozen=True)
class ToleranceProfile:
    """Shared tolerances.

    rank_rel:   relative singular value cutoff for rank decisions
    feas:       absolute feasibility slack for memberships and closures
    positivity: strictness margin for quantities required to be positive
    """
    rank_rel: float = 1e-10
    feas: float = 1e-9
    positivity: float = 1e-8

    def __post_init__(self):
        for name in ("rank_rel", "feas", "positivity"):
            v = getattr(self, name)
            if not (0.0 < v < 1e-2):
                raise InvalidInput(f"tolerance {name}={v} outside (0, 1e-2)")

    def scaled(self, diameter: float) -> "ToleranceProfile":
        """Feasibility tolerances grow with the instance diameter."""
        s = max(1.0, float(diameter))
        return ToleranceProfile(self.rank_rel, self.feas * s, self.positivity)


DEFAULT_TOL = ToleranceProfile()


def _as_matrix(M, name="matrix"):
    A = np.ascontiguousarray(np.asarray(M, dtype=np.float64))
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return A


def _as_vector(v, name="vector"):
    x = np.ascontiguousarray(np.asarray(v, dtype=np.float64))
    if x.ndim != 1:
        raise InvalidInput(f"{name} must be 1-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return x


def matrix_rank(M, tol: ToleranceProfile = DEFAULT_TOL) -> int:
    """Numerical rank with cutoff rank_rel * smax * max(shape)."""
    A = _as_matrix(M)
    if A.shape[0] == 0 or A.shape[1] == 0:
        return 0
    return int(_kernels.matrix_rank_svd(A, tol.rank_rel))


def positive_kernel(M, tol: ToleranceProfile = DEFAULT_TOL):
    """Strictly positive kernel vector of M, scaled so min component is 1.

    Requires rank(M) = cols - 1 (one-dimensional kernel), otherwise
    PreconditionViolation.  Returns None when the kernel direction has mixed
    signs or a component within tol.positivity of zero (relative to the
    largest), since then no strictly positive kernel vector exists.
    """
    A = _as_matrix(M)
    cols = A.shape[1]
    if cols == 0:
        raise PreconditionViolation("kernel of an empty matrix is undefined")
    rank, v = _kernels.rank_and_kernel(A, tol.rank_rel)
    if rank != cols - 1:
        raise PreconditionViolation(
            f"positive_kernel needs rank = cols - 1, got rank {rank} of {cols}")
    big = int(np.argmax(np.abs(v)))
    if v[big] < 0.0:
        v = -v
    vmax = float(np.max(v))
    vmin = float(np.min(v))
    if vmax <= 0.0 or vmin <= tol.positivity * vmax:
        return None
    return v / vmin


def fixed_subspace(Q, tol: ToleranceProfile = DEFAULT_TOL):
    """Orthonormal basis (columns) of {x : Q x = x} for an orthogonal Q."""
    A = _as_matrix(Q, "Q")
    n = A.shape[0]
    if A.shape[1] != n:
        raise InvalidInput("Q must be square")
    if not np.allclose(A @ A.T, np.eye(n), atol=1e-8):
        raise InvalidInput("Q is not orthogonal")
    E = np.ascontiguousarray(A - np.eye(n))
    return np.asarray(_kernels.nullspace_svd(E, tol.rank_rel))


def project_polyhedral_cone(point, normals, tol: ToleranceProfile = DEFAULT_TOL,
                            max_iter: int = 0):
    """Euclidean projection of point onto {x : <normals[j], x> >= 0 for all j}.

    Uses the polar decomposition: the projection equals point + N^T mu where
    mu solves the nonnegative least squares min ||N^T mu + point||.
    """
    p = _as_vector(point, "point")
    N = _as_matrix(normals, "normals")
    if N.shape[1] != p.shape[0]:
        raise InvalidInput("normals and point dimensions disagree")
    if N.shape[0] == 0:
        return p.copy()
    if max_iter <= 0:
        max_iter = 100 * (N.shape[0] + p.shape[0])
    G = np.ascontiguousarray(N.T)
    proj, mu, st = _kernels.cone_project_reduced(G, p, max_iter)
    if st != 0:
        raise NumericalFailure("cone projection did not converge")
    proj = np.asarray(proj)
    # certify: result in cone, displacement in polar cone, orthogonality
    viol = float(np.min(N @ proj)) if N.shape[0] else 0.0
    scale = max(1.0, float(np.linalg.norm(p)))
    if viol < -100.0 * tol.feas * scale:
        raise NumericalFailure("cone projection violates the cone")
    gap = abs(float(proj @ (proj - p)))
    if gap > 100.0 * tol.feas * scale * scale:
        raise NumericalFailure("cone projection fails orthogonality")
    return proj


@dataclass(frozen=True)
class ConeBallProblem:
    """Maximize <objective, x> over the unit ball intersected with a cone.

    The feasible set is {x : ||x|| <= 1, <cone_normals[j], x> >= 0,
    subspace_map x = x}; subspace_map must be orthogonal.  In the trajectory
    pipeline the cone normals are the transported facet normals a_j, the
    objective is their sum, and the subspace is the fixed space of the
    composite reflection.
    """
    objective: np.ndarray
    cone_normals: np.ndarray
    subspace_map: np.ndarray

    def dim(self) -> int:
        return int(self.objective.shape[0])


def max_linear_over_cone_ball(problem: ConeBallProblem,
                              tol: ToleranceProfile = DEFAULT_TOL,
                              max_iter: int = 0):
    """Solve a ConeBallProblem.  Returns (value, x) or None when degenerate.

    The maximum over the ball-cone intersection is attained at the normalized
    cone projection of the objective, with value equal to the projection
    norm.  A projection norm within tol.feas of zero means the objective is
    polar to the cone and the problem is degenerate.
    """
    c = _as_vector(problem.objective, "objective")
    A = _as_matrix(problem.cone_normals, "cone_normals")
    Q = _as_matrix(problem.subspace_map, "subspace_map")
    n = c.shape[0]
    if A.shape[1] != n or Q.shape != (n, n):
        raise InvalidInput("ConeBallProblem shapes disagree")
    B = fixed_subspace(Q, tol)
    if B.shape[1] == 0:
        return None
    chat = np.ascontiguousarray(B.T @ c)
    G = np.ascontiguousarray(B.T @ A.T)
    if max_iter <= 0:
        max_iter = 100 * (A.shape[0] + n)
    phat, mu, st = _kernels.cone_project_reduced(G, chat, max_iter)
    if st != 0:
        raise NumericalFailure("cone-ball projection did not converge")
    phat = np.asarray(phat)
    value = float(np.linalg.norm(phat))
    if value <= tol.feas:
        return None
    x = B @ (phat / value)
    return value, x


@dataclass(frozen=True)
class PlacementLP:
    """Scaling-and-translation LP for a direction-closed polygonal line.

    Variables are (rho, lam, s) with lam >= 0 the scale of the line vertices
    ``xi`` and s the translation.  Equality rows force each scaled vertex
    onto its carrier hyperplane: lam <xi_j, eq_normals[j]> + <s, eq_normals[j]>
    = eq_offsets[j].  Inequality rows keep every vertex at depth rho inside
    the remaining halfspaces: rho + lam <xi_{row_point[r]}, ineq_normals[r]>
    + <s, ineq_normals[r]> <= ineq_offsets[r].  Objective: maximize rho.
    """
    xi: np.ndarray
    eq_normals: np.ndarray
    eq_offsets: np.ndarray
    ineq_normals: np.ndarray
    ineq_offsets: np.ndarray
    row_point: np.ndarray

    def standard_form(self, objective=None):
        """Return (A, b, c) for max c.x s.t. A x = b, x >= 0.

        Variable layout: [rho, lam, s+ (n), s- (n), slacks (one per
        inequality row)].  ``objective`` optionally replaces the default
        maximize-rho cost on the (rho, lam, s) block; it has length 2 + n
        and is expanded to the split variables.
        """
        xi = _as_matrix(self.xi, "xi")
        m, n = xi.shape
        eqn = _as_matrix(self.eq_normals, "eq_normals")
        eqb = _as_vector(self.eq_offsets, "eq_offsets")
        inn = _as_matrix(self.ineq_normals, "ineq_normals")
        inb = _as_vector(self.ineq_offsets, "ineq_offsets")
        rp = np.asarray(self.row_point, dtype=np.int64)
        if eqn.shape != (m, n) or eqb.shape != (m,):
            raise InvalidInput("equality row shapes disagree with xi")
        R = inn.shape[0]
        if inn.shape[1] != n or inb.shape != (R,) or rp.shape != (R,):
            raise InvalidInput("inequality row shapes disagree")
        rows = m + R
        cols = 2 + 2 * n + R
        A = np.zeros((rows, cols))
        b = np.zeros(rows)
        for j in range(m):
            A[j, 1] = xi[j] @ eqn[j]
            A[j, 2:2 + n] = eqn[j]
            A[j, 2 + n:2 + 2 * n] = -eqn[j]
            b[j] = eqb[j]
        for r in range(R):
            row = m + r
            A[row, 0] = 1.0
            A[row, 1] = xi[rp[r]] @ inn[r]
            A[row, 2:2 + n] = inn[r]
            A[row, 2 + n:2 + 2 * n] = -inn[r]
            A[row, 2 + 2 * n + r] = 1.0
            b[row] = inb[r]
        c = np.zeros(cols)
        if objective is None:
            c[0] = 1.0
        else:
            obj = _as_vector(objective, "objective")
            if obj.shape != (2 + n,):
                raise InvalidInput("objective must have length 2 + dim")
            c[0] = obj[0]
            c[1] = obj[1]
            c[2:2 + n] = obj[2:]
            c[2 + n:2 + 2 * n] = -obj[2:]
        return A, b, c


def solve_lp(A, b, c, tol: ToleranceProfile = DEFAULT_TOL,
             max_pivots: int = 1000):
    """Maximize c.x subject to A x = b, x >= 0 (dense two-phase simplex).

    Returns (status, x, value) with status one of 'optimal', 'infeasible',
    'unbounded'.  Raises NumericalFailure on a pivot-limit stall or when the
    reported optimum fails the residual check.
    """
    A = _as_matrix(A, "A")
    b = _as_vector(b, "b")
    c = _as_vector(c, "c")
    if A.shape[0] != b.shape[0] or A.shape[1] != c.shape[0]:
        raise InvalidInput("LP shapes disagree")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0,
                float(np.max(np.abs(b))) if b.size else 1.0)
    st, x, piv = _kernels.simplex_standard(A, b, c, max_pivots, 1e-10 * scale)
    if st == _kernels.LP_INFEASIBLE:
        return "infeasible", None, None
    if st == _kernels.LP_UNBOUNDED:
        return "unbounded", None, None
    if st != _kernels.LP_OPTIMAL:
        raise NumericalFailure(f"simplex hit the pivot limit ({max_pivots})")
    x = np.asarray(x)
    if x.size:
        floor = float(np.min(x))
        if floor < -1e3 * tol.feas * scale:
            raise NumericalFailure(
                f"simplex returned a negative variable ({floor:.3e})")
        if floor < 0.0:
            # degenerate pivots leave negative zeros; certified small above
            x = np.maximum(x, 0.0)
    resid = float(np.max(np.abs(A @ x - b))) if b.size else 0.0
    if resid > 1e3 * tol.feas * scale:
        raise NumericalFailure(f"simplex residual {resid:.3e} too large")
    return "optimal", x, float(c @ x)


def solve_placement(lp: PlacementLP, tol: ToleranceProfile = DEFAULT_TOL,
                    objective=None, max_pivots: int = 1000):
    """Solve a PlacementLP.  Returns (rho, lam, s) or None when infeasible."""
    A, b, c = lp.standard_form(objective)
    status, x, _ = solve_lp(A, b, c, tol, max_pivots)
    if status == "infeasible":
        return None
    if status != "optimal":
        raise NumericalFailure(f"placement LP came back {status}")
    n = lp.xi.shape[1]
    rho = float(x[0])
    lam = float(x[1])
    s = np.asarray(x[2:2 + n] - x[2 + n:2 + 2 * n])
    return rho, lam, s


def nonneg_lstsq(A, b, max_iter: int = 0):
    """Nonnegative least squares min ||Ax - b||, x >= 0.  Returns (x, rnorm)."""
    A = _as_matrix(A, "A")
    b = _as_vector(b, "b")
    if A.shape[0] != b.shape[0]:
        raise InvalidInput("A and b row counts disagree")
    if max_iter <= 0:
        max_iter = 100 * (A.shape[0] + A.shape[1])
    x, st = _kernels.nnls_lh(A, b, max_iter)
    if st != 0:
        raise NumericalFailure("nonnegative least squares did not converge")
    x = np.asarray(x)
    return x, float(np.linalg.norm(A @ x - b))
