"""Enumeration search for length-minimizing closed billiard trajectories.

The driver walks every canonical facet tuple (cyclic shifts deduplicated),
runs the six-stage direction-then-placement pipeline on each, and keeps the
shortest trajectory under a deterministic tie-break.  Facet tuples only ever
produce regular trajectories; a separate facet-perpendicular scan contributes
the 2-bounce chords whose far endpoint may sit on a lower-dimensional face,
which is where minimizers of bodies without parallel facet pairs live.
"""

import itertools
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Polytope, Trajectory
from .numerics import (DEFAULT_TOL, InvalidInput, PlacementLP,
                       PreconditionViolation, ToleranceProfile, solve_lp,
                       solve_placement)
from .verify import verify_billiard

STAGES = ("rank_U", "kernel_mu", "socp", "rank_N", "kernel_lambda",
          "lp_infeasible", "lp_nonregular", "accepted")

_STAGE_OF_STATUS = {
    _kernels.STATUS_ACCEPTED: "accepted",
    _kernels.STATUS_RANK_U: "rank_U",
    _kernels.STATUS_KERNEL_MU: "kernel_mu",
    _kernels.STATUS_SOCP: "socp",
    _kernels.STATUS_RANK_N: "rank_N",
    _kernels.STATUS_KERNEL_LAMBDA: "kernel_lambda",
    _kernels.STATUS_LP_INFEASIBLE: "lp_infeasible",
    _kernels.STATUS_LP_NONREGULAR: "lp_nonregular",
    _kernels.STATUS_NUMERICAL_SOCP: "socp",
    _kernels.STATUS_NUMERICAL_LP: "lp_infeasible",
}

_QUANTUM = 1e-9  # lengths are compared after rounding to this grid


@dataclass(frozen=True)
class SearchOptions:
    max_bounces: int = 0        # 0 means dim + 1
    tol: ToleranceProfile = None
    workers: int = 1


@dataclass
class CandidateResult:
    tuple: tuple
    stage: str
    trajectory: Trajectory = None
    rejection_detail: str = ""
    rho: float = 0.0
    lam: float = 0.0


@dataclass
class SearchReport:
    best: Trajectory = None
    best_tuple: tuple = None
    best_regular: Trajectory = None
    best_regular_tuple: tuple = None
    per_m_best: dict = field(default_factory=dict)
    stage_counts: dict = field(default_factory=dict)
    tuples_examined: int = 0
    elapsed: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def best_length(self):
        return None if self.best is None else self.best.length()


def enumerate_facet_tuples(f: int, m: int):
    """Canonical cyclic orderings of m distinct facets out of f.

    Canonical means the smallest index leads; every cyclic class appears
    exactly once, so the stream has C(f, m) * (m-1)! entries in lexicographic
    order.  m > f yields nothing.
    """
    if m < 2:
        raise InvalidInput("facet tuples need at least 2 entries")
    for comb in itertools.combinations(range(f), m):
        for rest in itertools.permutations(comb[1:]):
            yield (comb[0],) + rest


def count_facet_tuples(f: int, m_max: int) -> int:
    total = 0
    for m in range(2, m_max + 1):
        if m > f:
            break
        c = 1
        for i in range(m):
            c = c * (f - i) // (i + 1)
        fact = 1
        for i in range(1, m):
            fact *= i
        total += c * fact
    return total


def propagate_normals(n1, units):
    """Reflect n1 through each unit normal in order.

    Returns (directions m x n, multipliers mu, closure residual) with
    n_{j+1} = n_j - mu_j u_j, mu_j = 2 <n_j, u_j>.  The closure residual is
    the distance from the once-more-reflected last direction back to n1.
    """
    U = np.atleast_2d(np.asarray(units, dtype=np.float64))
    n1 = np.asarray(n1, dtype=np.float64)
    m, n = U.shape
    if n1.shape != (n,):
        raise InvalidInput("direction and normals dimensions disagree")
    dirs = np.zeros((m, n))
    mus = np.zeros(m)
    dirs[0] = n1
    for j in range(m):
        mus[j] = 2.0 * float(dirs[j] @ U[j])
        nxt = dirs[j] - mus[j] * U[j]
        if j < m - 1:
            dirs[j + 1] = nxt
        else:
            closure = float(np.linalg.norm(nxt - n1))
    return dirs, mus, closure


def build_closed_line(directions, weights, tol: ToleranceProfile = DEFAULT_TOL):
    """Vertices of the closed polygonal line gamma_{j+1} = gamma_j + w_j d_j.

    The weighted directions must sum to (numerically) zero; otherwise the
    line does not close and a PreconditionViolation is raised.
    """
    D = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    m, n = D.shape
    if w.shape != (m,):
        raise InvalidInput("one weight per direction required")
    if np.any(w <= 0.0):
        raise PreconditionViolation("weights must be positive")
    total = w @ D
    scale = max(1.0, float(np.max(np.abs(w))))
    if float(np.linalg.norm(total)) > tol.feas * scale * 100.0:
        raise PreconditionViolation("weighted directions do not close")
    gamma = np.zeros((m, n))
    for j in range(m - 1):
        gamma[j + 1] = gamma[j] + w[j] * D[j]
    return gamma


def evaluate_tuple(P: Polytope, t, tol: ToleranceProfile = None) -> CandidateResult:
    """Run the direction-then-placement pipeline for one facet tuple."""
    tol = tol or P.tol
    t = tuple(int(i) for i in t)
    m = len(t)
    if m < 2 or len(set(t)) != m or min(t) < 0 or max(t) >= P.n_facets:
        raise InvalidInput(f"invalid facet tuple {t}")
    status, pts, dirs, seg, rho, lam = _kernels.evaluate_tuple_core(
        np.ascontiguousarray(P.normals), np.ascontiguousarray(P.offsets),
        np.asarray(t, dtype=np.int64), tol.rank_rel, tol.feas, tol.positivity,
        100 * (m + P.dim), 1000)
    stage = _STAGE_OF_STATUS[int(status)]
    detail = ""
    if status == _kernels.STATUS_NUMERICAL_SOCP:
        detail = "numerical failure while solving for the starting direction"
    elif status == _kernels.STATUS_NUMERICAL_LP:
        detail = "numerical failure while solving the placement LP"
    traj = Trajectory(np.asarray(pts).copy()) if stage == "accepted" else None
    return CandidateResult(tuple=t, stage=stage, trajectory=traj,
                           rejection_detail=detail, rho=float(rho), lam=float(lam))


def build_placement(P: Polytope, t, tol: ToleranceProfile = None):
    """Reconstruct the placement LP of a tuple from the public primitives.

    Mirrors the kernel pipeline stage by stage with the numerics-module
    operations; used as an independent cross-check and by tests that re-solve
    the placement with alternative objectives.  Returns (PlacementLP, info)
    or None when a pre-placement stage rejects the tuple.
    """
    from .numerics import (ConeBallProblem, matrix_rank,
                           max_linear_over_cone_ball, positive_kernel)
    tol = tol or P.tol
    t = tuple(int(i) for i in t)
    m = len(t)
    n = P.dim
    U = np.array([P.normals[t[(j + 1) % m]] for j in range(m)])  # rows u_j
    if matrix_rank(U.T, tol) != m - 1:
        return None
    try:
        mu = positive_kernel(U.T, tol)
    except PreconditionViolation:
        return None
    if mu is None:
        return None
    acc = np.eye(n)
    A = np.zeros((m, n))
    for j in range(m):
        A[j] = 2.0 * acc @ U[j]
        acc = acc @ (np.eye(n) - 2.0 * np.outer(U[j], U[j]))
    prob = ConeBallProblem(objective=A.sum(axis=0), cone_normals=A, subspace_map=acc)
    sol = max_linear_over_cone_ball(prob, tol)
    if sol is None:
        return None
    _, n1 = sol
    dirs, mus, closure = propagate_normals(n1, U)
    if np.any(mus <= tol.positivity) or closure > 100.0 * tol.feas:
        return None
    if matrix_rank(dirs.T, tol) != m - 1:
        return None
    lamp = positive_kernel(dirs.T, tol)
    if lamp is None:
        return None
    xi = build_closed_line(dirs, lamp, tol)
    eq_normals = np.array([P.normals[t[j]] for j in range(m)])
    eq_offsets = np.array([P.offsets[t[j]] for j in range(m)])
    rows_n, rows_b, rows_p = [], [], []
    for j in range(m):
        for fi in range(P.n_facets):
            if fi == t[j]:
                continue
            rows_n.append(P.normals[fi])
            rows_b.append(P.offsets[fi])
            rows_p.append(j)
    lp = PlacementLP(xi=xi, eq_normals=eq_normals, eq_offsets=eq_offsets,
                     ineq_normals=np.array(rows_n), ineq_offsets=np.array(rows_b),
                     row_point=np.array(rows_p, dtype=np.int64))
    info = {"dirs": dirs, "mu": np.asarray(mu), "lamp": np.asarray(lamp), "xi": xi}
    return lp, info


# -- facet-perpendicular chord scan ---------------------------------------

def double_normal_scan(P: Polytope, tol: ToleranceProfile = None):
    """2-bounce chords running perpendicular to each facet.

    For facet i with outward normal u, the slab breadth is
    offsets[i] - min_v <u, v>.  The chord drops from the facet onto the
    antipodal face; its far endpoint keeps u in its normal cone by sitting
    at the slab minimum, so the reflection law holds at both ends even when
    the far face is an edge or a vertex.  Candidates that fail independent
    verification are discarded.
    """
    tol = tol or P.tol
    feas = tol.feas * P.scale
    out = []
    for i in range(P.n_facets):
        u = P.normals[i]
        proj = P.vertices @ u
        lo = float(np.min(proj))
        beta = float(P.offsets[i] - lo)
        if beta <= 100.0 * feas:
            continue
        far = P.vertices[proj <= lo + feas]
        p2 = far.mean(axis=0)
        p1 = p2 + beta * u
        if not P.contains(p1):
            placed = _place_perpendicular_chord(P, i, beta, tol)
            if placed is None:
                continue
            p1 = placed
            p2 = p1 - beta * u
        traj = Trajectory(np.array([p1, p2]))
        rep = verify_billiard(P, traj, tol)
        if not rep.valid_billiard or not rep.in_FT:
            continue
        far_active = P.active_facets(p2)
        label = (i, min(far_active)) if far_active else (i, i)
        out.append({"trajectory": traj, "tuple": label, "regular": rep.regular,
                    "length": traj.length()})
    return out


def _place_perpendicular_chord(P: Polytope, i: int, beta: float,
                               tol: ToleranceProfile):
    """Slide a facet-perpendicular chord to maximize its midpoint clearance.

    Variables (x+, x-, rho, slacks): x on facet i's hyperplane, both chord
    endpoints inside the body, midpoint at depth rho.  Returns the facet-side
    endpoint, or None when no placement gives the midpoint positive depth.
    """
    n = P.dim
    f = P.n_facets
    u = P.normals[i]
    nineq = 2 * (f - 1) + f
    rows = 1 + nineq
    cols = 2 * n + 1 + nineq
    A = np.zeros((rows, cols))
    b = np.zeros(rows)
    A[0, :n] = u
    A[0, n:2 * n] = -u
    b[0] = P.offsets[i]
    r = 1
    for k in range(f):
        if k == i:
            continue
        A[r, :n] = P.normals[k]
        A[r, n:2 * n] = -P.normals[k]
        A[r, 2 * n + 1 + (r - 1)] = 1.0
        b[r] = P.offsets[k]
        r += 1
    for k in range(f):
        if k == i:
            continue
        A[r, :n] = P.normals[k]
        A[r, n:2 * n] = -P.normals[k]
        A[r, 2 * n + 1 + (r - 1)] = 1.0
        b[r] = P.offsets[k] + beta * float(P.normals[k] @ u)
        r += 1
    for k in range(f):
        A[r, :n] = P.normals[k]
        A[r, n:2 * n] = -P.normals[k]
        A[r, 2 * n] = 1.0
        A[r, 2 * n + 1 + (r - 1)] = 1.0
        b[r] = P.offsets[k] + 0.5 * beta * float(P.normals[k] @ u)
        r += 1
    c = np.zeros(cols)
    c[2 * n] = 1.0
    status, x, value = solve_lp(A, b, c, tol)
    if status != "optimal" or value <= tol.feas * P.scale:
        return None
    return np.asarray(x[:n] - x[n:2 * n])


# -- parallel driver --------------------------------------------------------

_WORK_CTX = None


def _eval_chunk(args):
    """Evaluate tuples [start, stop) of the (f, m) stream; fork-inherited ctx."""
    m, start, stop = args
    normals, offsets, f, rank_rel, feas, positivity, ndim = _WORK_CTX
    counts = np.zeros(10, dtype=np.int64)
    accepted = []
    stream = itertools.islice(enumerate_facet_tuples(f, m), start, stop)
    for tup in stream:
        status, pts, dirs, seg, rho, lam = _kernels.evaluate_tuple_core(
            normals, offsets, np.asarray(tup, dtype=np.int64),
            rank_rel, feas, positivity, 100 * (m + ndim), 1000)
        counts[int(status)] += 1
        if status == _kernels.STATUS_ACCEPTED:
            accepted.append((tup, np.asarray(pts).copy(), float(rho), float(lam)))
    return counts, accepted


def _candidate_key(length, m, source_rank, label):
    return (int(round(length / _QUANTUM)), m, source_rank, label)


def search_min(P: Polytope, opts: SearchOptions = None, **kw) -> SearchReport:
    """Enumerate facet tuples (plus perpendicular chords) and keep the minimum.

    Ties within the length quantum resolve toward fewer bounces, then the
    tuple pipeline over the chord scan, then the lexicographically smallest
    tuple, making the outcome independent of worker count and scheduling.
    """
    global _WORK_CTX
    if opts is None:
        opts = SearchOptions(**kw)
    elif kw:
        raise InvalidInput("pass either opts or keyword options, not both")
    tol = opts.tol or P.tol
    n = P.dim
    f = P.n_facets
    mb = opts.max_bounces if opts.max_bounces else n + 1
    if mb < 2:
        raise InvalidInput("max_bounces must be at least 2")
    mmax = min(n + 1, mb, f)
    workers = max(1, int(opts.workers))

    start_time = time.perf_counter()
    chunks = []
    for m in range(2, mmax + 1):
        total = count_facet_tuples(f, m) - count_facet_tuples(f, m - 1)
        if total <= 0:
            continue
        pieces = min(max(1, workers * 4), max(1, total // 64)) if workers > 1 else 1
        bounds = np.linspace(0, total, pieces + 1).astype(int)
        for a, bnd in zip(bounds[:-1], bounds[1:]):
            if bnd > a:
                chunks.append((m, int(a), int(bnd)))

    _WORK_CTX = (np.ascontiguousarray(P.normals), np.ascontiguousarray(P.offsets),
                 f, tol.rank_rel, tol.feas, tol.positivity, n)
    results = None
    if workers > 1 and hasattr(os, "fork"):
        _kernels.warmup()  # compile in the parent so forks inherit the machine code
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                results = pool.map(_eval_chunk, chunks)
        except (OSError, ValueError):
            results = None
    if results is None:
        results = [_eval_chunk(ch) for ch in chunks]

    counts = np.zeros(10, dtype=np.int64)
    accepted = []
    for cts, acc in results:
        counts += cts
        accepted.extend(acc)

    stage_counts = {s: 0 for s in STAGES}
    for status, stage in _STAGE_OF_STATUS.items():
        stage_counts[stage] += int(counts[status])
    tuples_examined = int(np.sum(counts))

    report = SearchReport(stage_counts=stage_counts, tuples_examined=tuples_examined)

    # bucket tuple-pipeline acceptances by bounce count, then gate the best
    # of each bucket through the independent checks before it is eligible
    by_m = {}
    for tup, pts, rho, lam in accepted:
        traj = Trajectory(pts)
        key = _candidate_key(traj.length(), len(tup), 0, tup)
        by_m.setdefault(len(tup), []).append((key, tup, traj))
    per_m = {}
    for m, cands in by_m.items():
        cands.sort(key=lambda c: c[0])
        for key, tup, traj in cands:
            rep = verify_billiard(P, traj, tol)
            if not rep.valid_billiard:
                report.warnings.append(
                    f"tuple {tup} accepted by the pipeline but failed verification; dropped")
                continue
            if not rep.in_FT:
                report.warnings.append(
                    f"tuple {tup} accepted but can be translated inside; dropped")
                continue
            per_m[m] = {"key": key, "tuple": tup, "trajectory": traj,
                        "length": traj.length(), "regular": bool(rep.regular),
                        "source": "tuple"}
            break

    scan_best = None
    for cand in double_normal_scan(P, tol):
        key = _candidate_key(cand["length"], 2, 1, cand["tuple"])
        if scan_best is None or key < scan_best["key"]:
            scan_best = {"key": key, "tuple": cand["tuple"],
                         "trajectory": cand["trajectory"], "length": cand["length"],
                         "regular": bool(cand["regular"]), "source": "scan"}
    if scan_best is not None:
        cur = per_m.get(2)
        if cur is None or scan_best["key"] < cur["key"]:
            per_m[2] = scan_best

    report.per_m_best = {m: per_m[m] for m in sorted(per_m)}

    best = None
    best_reg = None
    for m in sorted(per_m):
        e = per_m[m]
        if best is None or e["key"] < best["key"]:
            best = e
        if e["regular"] and (best_reg is None or e["key"] < best_reg["key"]):
            best_reg = e
    # a regular chord can lose its m=2 slot to a shorter non-regular one;
    # it still counts for the regular champion
    if scan_best is not None and scan_best["regular"]:
        if best_reg is None or scan_best["key"] < best_reg["key"]:
            best_reg = scan_best

    if best is not None:
        report.best = best["trajectory"]
        report.best_tuple = tuple(best["tuple"])
    if best_reg is not None:
        report.best_regular = best_reg["trajectory"]
        report.best_regular_tuple = tuple(best_reg["tuple"])
    if best_reg is None:
        report.warnings.append(
            "no regular closed billiard trajectory found; when a minimizer has "
            "fewer than dim+1 bouncing points a non-regular minimizer exists, "
            "so the true minimum may be shorter than any regular candidate")
    elif best is not None and not best["regular"]:
        report.warnings.append(
            "shortest trajectory found is non-regular; best regular length "
            f"{best_reg['length']:.12g} exceeds it")

    report.elapsed = time.perf_counter() - start_time
    return report
