"""Low-level numeric kernels shared by the solvers and the tuple pipeline.

Every function here is written in a numba-compatible numpy subset (plain loops,
float64 arrays, no Python objects).  The module runs in one of two modes:

* ``numba``  - each kernel is wrapped with ``numba.njit(cache=True)``
* ``numpy``  - the same source runs as ordinary Python

The mode is picked at import time from the ``POLYBILLIARDS_BACKEND``
environment variable (``numba`` is the default when importable) and can be
switched at runtime with :func:`set_backend`, which rebinds the module
globals.  Both modes execute the identical statements in the identical order,
so results agree bit for bit.
"""

import os

import numpy as np

_EPS = 2.220446049250313e-16

# statuses shared by evaluate_tuple_core and the wrappers in search.py
STATUS_ACCEPTED = 0
STATUS_RANK_U = 1
STATUS_KERNEL_MU = 2
STATUS_SOCP = 3
STATUS_RANK_N = 4
STATUS_KERNEL_LAMBDA = 5
STATUS_LP_INFEASIBLE = 6
STATUS_LP_NONREGULAR = 7
STATUS_NUMERICAL_SOCP = 8
STATUS_NUMERICAL_LP = 9

# simplex statuses
LP_OPTIMAL = 0
LP_INFEASIBLE = 1
LP_UNBOUNDED = 2
LP_PIVOT_LIMIT = 3


def matrix_rank_svd(M, rank_rel):
    """Rank = number of singular values above rank_rel * smax * max(shape)."""
    r = M.shape[0]
    c = M.shape[1]
    if r == 0 or c == 0:
        return 0
    s = np.linalg.svd(M)[1]
    smax = s[0]
    if smax <= 0.0:
        return 0
    cut = rank_rel * smax * max(r, c)
    rank = 0
    for i in range(s.shape[0]):
        if s[i] > cut:
            rank += 1
    return rank


def rank_and_kernel(M, rank_rel):
    """Rank plus the right singular vector of the smallest singular value."""
    r = M.shape[0]
    c = M.shape[1]
    u, s, vt = np.linalg.svd(M)
    smax = s[0]
    cut = rank_rel * smax * max(r, c)
    rank = 0
    for i in range(s.shape[0]):
        if s[i] > cut:
            rank += 1
    v = vt[c - 1, :].copy()
    return rank, v


def nullspace_svd(M, rank_rel):
    """Orthonormal columns spanning the nullspace of M at the rank cutoff."""
    r = M.shape[0]
    c = M.shape[1]
    u, s, vt = np.linalg.svd(M)
    smax = 0.0
    if s.shape[0] > 0:
        smax = s[0]
    cut = rank_rel * smax * max(r, c)
    rank = 0
    for i in range(s.shape[0]):
        if s[i] > cut:
            rank += 1
    k = c - rank
    B = np.empty((c, k))
    for j in range(k):
        for i in range(c):
            B[i, j] = vt[rank + j, i]
    return B


def lstsq_svd(A, b):
    """Minimum-norm least-squares solution via SVD (tiny dense systems)."""
    r = A.shape[0]
    c = A.shape[1]
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    cut = _EPS * max(r, c) * (s[0] if s.shape[0] > 0 else 0.0) * 10.0
    x = np.zeros(c)
    for i in range(s.shape[0]):
        if s[i] > cut:
            # coefficient <u_i, b> / s_i
            coef = 0.0
            for t in range(r):
                coef += u[t, i] * b[t]
            coef /= s[i]
            for t in range(c):
                x[t] += coef * vt[i, t]
    return x


def nnls_lh(A, b, max_iter):
    """Lawson-Hanson nonnegative least squares: min ||Ax - b||, x >= 0.

    Returns (x, 0) on convergence, (x, 1) when the iteration cap is hit.
    """
    m_ = A.shape[0]
    n_ = A.shape[1]
    x = np.zeros(n_)
    passive = np.zeros(n_, dtype=np.bool_)
    resid = b.copy()

    # gradient tolerance scaled to the data
    anorm = 0.0
    for i in range(m_):
        for j in range(n_):
            anorm += A[i, j] * A[i, j]
    bnorm = 0.0
    for i in range(m_):
        bnorm += b[i] * b[i]
    wtol = 100.0 * _EPS * max(1.0, np.sqrt(anorm) * np.sqrt(bnorm))

    iters = 0
    while iters < max_iter:
        # w = A^T resid, restricted to the active (zero) set
        best = -1
        bestw = wtol
        for j in range(n_):
            if passive[j]:
                continue
            wj = 0.0
            for i in range(m_):
                wj += A[i, j] * resid[i]
            if wj > bestw:
                bestw = wj
                best = j
        if best < 0:
            return x, 0
        passive[best] = True

        while iters < max_iter:
            iters += 1
            # least squares on the passive columns
            cnt = 0
            for j in range(n_):
                if passive[j]:
                    cnt += 1
            idx = np.empty(cnt, dtype=np.int64)
            t = 0
            for j in range(n_):
                if passive[j]:
                    idx[t] = j
                    t += 1
            Ap = np.empty((m_, cnt))
            for i in range(m_):
                for j in range(cnt):
                    Ap[i, j] = A[i, idx[j]]
            z = lstsq_svd(Ap, b)
            zmin = z[0]
            for j in range(1, cnt):
                if z[j] < zmin:
                    zmin = z[j]
            if zmin > 0.0:
                for j in range(n_):
                    x[j] = 0.0
                for j in range(cnt):
                    x[idx[j]] = z[j]
                break
            # step toward z until the first passive coordinate hits zero
            alpha = 2.0
            for j in range(cnt):
                if z[j] <= 0.0:
                    xj = x[idx[j]]
                    den = xj - z[j]
                    if den > 0.0:
                        a = xj / den
                        if a < alpha:
                            alpha = a
            if alpha > 1.0:
                alpha = 1.0
            for j in range(cnt):
                xj = x[idx[j]]
                x[idx[j]] = xj + alpha * (z[j] - xj)
            for j in range(cnt):
                if x[idx[j]] <= 100.0 * _EPS * max(1.0, abs(z[j])):
                    x[idx[j]] = 0.0
                    passive[idx[j]] = False
        # refresh the residual for the next gradient pass
        for i in range(m_):
            ri = b[i]
            for j in range(n_):
                if x[j] != 0.0:
                    ri -= A[i, j] * x[j]
            resid[i] = ri
    return x, 1


def cone_project_reduced(G, chat, max_iter):
    """Project chat onto K = {y : G[:,j].y >= 0 for all j} (Moreau via NNLS).

    The polar cone is spanned by the columns -G[:,j]; its projection is
    -G mu* with mu* the NNLS solution of min ||G mu + chat||, and the cone
    projection is chat + G mu*.
    """
    k = G.shape[0]
    J = G.shape[1]
    rhs = np.empty(k)
    for i in range(k):
        rhs[i] = -chat[i]
    mu, st = nnls_lh(G, rhs, max_iter)
    p = chat.copy()
    for j in range(J):
        if mu[j] != 0.0:
            for i in range(k):
                p[i] += G[i, j] * mu[j]
    return p, mu, st


def simplex_standard(A, b, c, max_pivots, eps):
    """Two-phase dense simplex with Bland's rule.

    Maximizes c.x subject to A x = b, x >= 0.  Returns (status, x, pivots)
    with status 0 optimal, 1 infeasible, 2 unbounded, 3 pivot cap.
    """
    m_ = A.shape[0]
    n_ = A.shape[1]
    ncols = n_ + m_ + 1
    T = np.empty((m_, ncols))
    for i in range(m_):
        if b[i] < 0.0:
            for j in range(n_):
                T[i, j] = -A[i, j]
            bi = -b[i]
        else:
            for j in range(n_):
                T[i, j] = A[i, j]
            bi = b[i]
        for j in range(m_):
            T[i, n_ + j] = 0.0
        T[i, n_ + i] = 1.0
        T[i, ncols - 1] = bi
    basis = np.empty(m_, dtype=np.int64)
    for i in range(m_):
        basis[i] = n_ + i

    x = np.zeros(n_)
    pivots = 0

    for phase in range(2):
        # cost vector for this phase
        cc = np.zeros(n_ + m_)
        if phase == 0:
            for j in range(m_):
                cc[n_ + j] = -1.0
        else:
            for j in range(n_):
                cc[j] = c[j]
        limit = n_ if phase == 1 else n_ + m_

        while True:
            # reduced costs via the current basis costs
            cb = np.empty(m_)
            for i in range(m_):
                cb[i] = cc[basis[i]]
            enter = -1
            for j in range(limit):
                inbasis = False
                for i in range(m_):
                    if basis[i] == j:
                        inbasis = True
                        break
                if inbasis:
                    continue
                rc = cc[j]
                for i in range(m_):
                    if T[i, j] != 0.0:
                        rc -= cb[i] * T[i, j]
                if rc > eps:
                    enter = j
                    break
            if enter < 0:
                break
            # Bland ratio test: min b_i / T[i,enter] over positive entries,
            # ties broken by the smallest basis index
            leave = -1
            bestratio = 0.0
            for i in range(m_):
                tij = T[i, enter]
                if tij > eps:
                    ratio = T[i, ncols - 1] / tij
                    if leave < 0 or ratio < bestratio - eps or (
                            abs(ratio - bestratio) <= eps and basis[i] < basis[leave]):
                        leave = i
                        bestratio = ratio
            if leave < 0:
                if phase == 0:
                    return LP_INFEASIBLE, x, pivots
                return LP_UNBOUNDED, x, pivots
            pivots += 1
            if pivots > max_pivots:
                return LP_PIVOT_LIMIT, x, pivots
            piv = T[leave, enter]
            for j in range(ncols):
                T[leave, j] /= piv
            for i in range(m_):
                if i == leave:
                    continue
                factor = T[i, enter]
                if factor != 0.0:
                    for j in range(ncols):
                        T[i, j] -= factor * T[leave, j]
            basis[leave] = enter

        if phase == 0:
            # feasibility: all artificials must sit at (numerical) zero
            art = 0.0
            for i in range(m_):
                if basis[i] >= n_:
                    art += T[i, ncols - 1]
            scale = 1.0
            for i in range(m_):
                if abs(b[i]) > scale:
                    scale = abs(b[i])
            if art > 1e-7 * scale:
                return LP_INFEASIBLE, x, pivots
            # drive leftover artificials out of the basis where possible
            for i in range(m_):
                if basis[i] < n_:
                    continue
                enter = -1
                for j in range(n_):
                    if abs(T[i, j]) > eps:
                        enter = j
                        break
                if enter < 0:
                    # redundant row: neutralize it
                    for j in range(ncols):
                        T[i, j] = 0.0
                    T[i, basis[i]] = 1.0
                    T[i, ncols - 1] = 0.0
                    continue
                pivots += 1
                piv = T[i, enter]
                for j in range(ncols):
                    T[i, j] /= piv
                for r in range(m_):
                    if r == i:
                        continue
                    factor = T[r, enter]
                    if factor != 0.0:
                        for j in range(ncols):
                            T[r, j] -= factor * T[i, j]
                basis[i] = enter

    for i in range(m_):
        if basis[i] < n_:
            x[basis[i]] = T[i, ncols - 1]
    return LP_OPTIMAL, x, pivots


def evaluate_tuple_core(normals, offsets, tup, rank_rel, feas, positivity,
                        cone_max_iter, lp_max_pivots):
    """Run the full facet-tuple pipeline and return the first failing stage.

    normals: f x n outward unit facet normals, offsets: f, tup: m facet
    indices.  Returns (status, points m x n, dirs m x n, seg_lengths m,
    rho, lam); array contents are meaningful only for status 0.
    """
    f = normals.shape[0]
    n = normals.shape[1]
    m = tup.shape[0]
    points = np.zeros((m, n))
    dirs = np.zeros((m, n))
    seg = np.zeros(m)
    rho = 0.0
    lamv = 0.0

    # stage 1: U holds the normal of the facet each segment points INTO,
    # i.e. column j is the normal of the tuple's (j+1)-th facet cyclically
    U = np.empty((n, m))
    for j in range(m):
        fj = tup[(j + 1) % m]
        for i in range(n):
            U[i, j] = normals[fj, i]
    rankU, mu = rank_and_kernel(U, rank_rel)
    if rankU != m - 1:
        return STATUS_RANK_U, points, dirs, seg, rho, lamv

    # stage 2: strictly positive kernel of U (closing weights for -u steps)
    big = 0
    bigv = abs(mu[0])
    for i in range(1, m):
        if abs(mu[i]) > bigv:
            big = i
            bigv = abs(mu[i])
    if mu[big] < 0.0:
        for i in range(m):
            mu[i] = -mu[i]
    mumax = mu[0]
    mumin = mu[0]
    for i in range(1, m):
        if mu[i] > mumax:
            mumax = mu[i]
        if mu[i] < mumin:
            mumin = mu[i]
    if mumax <= 0.0 or mumin <= positivity * mumax:
        return STATUS_KERNEL_MU, points, dirs, seg, rho, lamv

    # stage 3: maximize <c, x> over the unit ball cut by the reflection cone.
    # a_j = 2 (R_0 ... R_{j-1}) u_j accumulated via rank-1 updates,
    # E = (R_0 ... R_{m-1})^T - I shares its nullspace with the untransposed
    # product since the factors are orthogonal.
    acc = np.eye(n)
    A_ineq = np.empty((n, m))
    cvec = np.zeros(n)
    tvec = np.empty(n)
    for j in range(m):
        for r in range(n):
            tj = 0.0
            for q in range(n):
                tj += acc[r, q] * U[q, j]
            tvec[r] = tj
        for r in range(n):
            A_ineq[r, j] = 2.0 * tvec[r]
            cvec[r] += 2.0 * tvec[r]
        for r in range(n):
            for q in range(n):
                acc[r, q] -= 2.0 * tvec[r] * U[q, j]
    E = acc.copy()
    for i in range(n):
        E[i, i] -= 1.0
    B = nullspace_svd(E, rank_rel)
    k = B.shape[1]
    if k == 0:
        return STATUS_SOCP, points, dirs, seg, rho, lamv
    chat = np.zeros(k)
    for i in range(k):
        for r in range(n):
            chat[i] += B[r, i] * cvec[r]
    G = np.zeros((k, m))
    for j in range(m):
        for i in range(k):
            g = 0.0
            for r in range(n):
                g += B[r, i] * A_ineq[r, j]
            G[i, j] = g
    phat, mul, st = cone_project_reduced(G, chat, cone_max_iter)
    if st != 0:
        return STATUS_NUMERICAL_SOCP, points, dirs, seg, rho, lamv
    val2 = 0.0
    for i in range(k):
        val2 += phat[i] * phat[i]
    val = np.sqrt(val2)
    if val <= feas:
        return STATUS_SOCP, points, dirs, seg, rho, lamv
    # projection KKT: <p, p - chat> = 0 and G^T p >= 0 up to scale
    kkt = 0.0
    for i in range(k):
        kkt += phat[i] * (phat[i] - chat[i])
    if abs(kkt) > 100.0 * feas * max(1.0, val2):
        return STATUS_NUMERICAL_SOCP, points, dirs, seg, rho, lamv
    for j in range(m):
        gp = 0.0
        for i in range(k):
            gp += G[i, j] * phat[i]
        if gp < -100.0 * feas * max(1.0, val):
            return STATUS_NUMERICAL_SOCP, points, dirs, seg, rho, lamv

    for r in range(n):
        d = 0.0
        for i in range(k):
            d += B[r, i] * phat[i]
        dirs[0, r] = d / val

    # propagate directions by reflection; every multiplier must stay positive
    for j in range(m):
        muj = 0.0
        for r in range(n):
            muj += dirs[j, r] * U[r, j]
        muj *= 2.0
        if muj <= positivity:
            return STATUS_SOCP, points, dirs, seg, rho, lamv
        if j < m - 1:
            for r in range(n):
                dirs[j + 1, r] = dirs[j, r] - muj * U[r, j]
        else:
            cres = 0.0
            for r in range(n):
                d = (dirs[j, r] - muj * U[r, j]) - dirs[0, r]
                cres += d * d
            if np.sqrt(cres) > 100.0 * feas:
                return STATUS_SOCP, points, dirs, seg, rho, lamv

    # stage 4: the direction matrix must again have rank m-1
    N = np.empty((n, m))
    for j in range(m):
        for r in range(n):
            N[r, j] = dirs[j, r]
    rankN, lamp = rank_and_kernel(N, rank_rel)
    if rankN != m - 1:
        return STATUS_RANK_N, points, dirs, seg, rho, lamv

    # stage 5: strictly positive closing weights for the direction line
    big = 0
    bigv = abs(lamp[0])
    for i in range(1, m):
        if abs(lamp[i]) > bigv:
            big = i
            bigv = abs(lamp[i])
    if lamp[big] < 0.0:
        for i in range(m):
            lamp[i] = -lamp[i]
    lmax = lamp[0]
    lmin = lamp[0]
    for i in range(1, m):
        if lamp[i] > lmax:
            lmax = lamp[i]
        if lamp[i] < lmin:
            lmin = lamp[i]
    if lmax <= 0.0 or lmin <= positivity * lmax:
        return STATUS_KERNEL_LAMBDA, points, dirs, seg, rho, lamv
    for i in range(m):
        lamp[i] = lamp[i] / lmin
    xi = np.zeros((m, n))
    for j in range(m - 1):
        for r in range(n):
            xi[j + 1, r] = xi[j, r] + lamp[j] * dirs[j, r]

    # stage 6: placement LP over (rho, lam, s+, s-, slacks), maximize rho
    nineq = m * (f - 1)
    rows = m + nineq
    cols = 2 + 2 * n + nineq
    A = np.zeros((rows, cols))
    bb = np.zeros(rows)
    cobj = np.zeros(cols)
    cobj[0] = 1.0
    for j in range(m):
        fj = tup[j]
        dxw = 0.0
        for r in range(n):
            dxw += xi[j, r] * normals[fj, r]
        A[j, 1] = dxw
        for r in range(n):
            A[j, 2 + r] = normals[fj, r]
            A[j, 2 + n + r] = -normals[fj, r]
        bb[j] = offsets[fj]
    row = m
    scol = 2 + 2 * n
    for j in range(m):
        for fi in range(f):
            if fi == tup[j]:
                continue
            dxw = 0.0
            for r in range(n):
                dxw += xi[j, r] * normals[fi, r]
            A[row, 0] = 1.0
            A[row, 1] = dxw
            for r in range(n):
                A[row, 2 + r] = normals[fi, r]
                A[row, 2 + n + r] = -normals[fi, r]
            A[row, scol] = 1.0
            bb[row] = offsets[fi]
            row += 1
            scol += 1
    lpstat, sol, piv = simplex_standard(A, bb, cobj, lp_max_pivots, 1e-10)
    if lpstat == LP_INFEASIBLE:
        return STATUS_LP_INFEASIBLE, points, dirs, seg, rho, lamv
    if lpstat != LP_OPTIMAL:
        return STATUS_NUMERICAL_LP, points, dirs, seg, rho, lamv
    rho = sol[0]
    lamv = sol[1]
    if lamv <= positivity:
        return STATUS_NUMERICAL_LP, points, dirs, seg, rho, lamv
    if rho <= feas:
        return STATUS_LP_NONREGULAR, points, dirs, seg, rho, lamv
    for j in range(m):
        for r in range(n):
            points[j, r] = lamv * xi[j, r] + (sol[2 + r] - sol[2 + n + r])
        seg[j] = lamv * lamp[j]
    return STATUS_ACCEPTED, points, dirs, seg, rho, lamv


_KERNEL_NAMES = [
    "matrix_rank_svd",
    "rank_and_kernel",
    "nullspace_svd",
    "lstsq_svd",
    "nnls_lh",
    "cone_project_reduced",
    "simplex_standard",
    "evaluate_tuple_core",
]

_PY_IMPLS = {name: globals()[name] for name in _KERNEL_NAMES}
_JIT_IMPLS = {}

try:
    import numba  # noqa: F401
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

_active_backend = "none"


def active_backend():
    return _active_backend


def set_backend(name):
    """Bind the module globals to 'numba' or 'numpy' implementations."""
    global _active_backend
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not importable")
        if not _JIT_IMPLS:
            from numba import njit
            for k in _KERNEL_NAMES:
                _JIT_IMPLS[k] = njit(cache=True)(_PY_IMPLS[k])
        for k in _KERNEL_NAMES:
            globals()[k] = _JIT_IMPLS[k]
    elif name == "numpy":
        for k in _KERNEL_NAMES:
            globals()[k] = _PY_IMPLS[k]
    else:
        raise ValueError(f"unknown backend {name!r}")
    _active_backend = name
    return _active_backend


def warmup():
    """Force compilation of all kernels on a tiny instance (numba mode)."""
    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    offsets = np.array([1.0, 0.0, 1.0, 0.0])
    tup = np.array([0, 1], dtype=np.int64)
    evaluate_tuple_core(normals, offsets, tup, 1e-10, 1e-9, 1e-8, 400, 1000)
    matrix_rank_svd(np.eye(3), 1e-10)
    nullspace_svd(np.zeros((2, 2)), 1e-10)


_env = os.environ.get("POLYBILLIARDS_BACKEND", "").strip().lower()
if _env == "numpy":
    set_backend("numpy")
elif _env == "numba":
    set_backend("numba")
elif NUMBA_AVAILABLE:
    set_backend("numba")
else:
    set_backend("numpy")
