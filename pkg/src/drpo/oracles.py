"""Brute-force reference solvers used to cross-check the optimisers.

None of these share code paths with :mod:`drpo.outer_solver`:

* ``qp_projected_gradient``: accelerated projected gradient for the
  minimum-variance QP, with exact projection by active-set enumeration.
* ``grid_search``: dense Cartesian grid over a box with raw (non-convex)
  restriction checks, followed by derivative-free COBYLA refinement of the
  best grid points.
* ``cone_rayleigh_min``: smallest Rayleigh quotient of the covariance over
  the recession cone of the region, found by enumerating the eigenvectors
  of every face.  It is the radius at which the best-case value first hits
  zero.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .restrictions import RestrictionSet, satisfies_many


def _project_polyhedron(y, G, h, E, e):
    """Euclidean projection onto ``{G w <= h, E w = e}`` for a handful of rows."""
    if G.shape[0] == 0 and E.shape[0] == 0:
        return y
    scale = 1.0 + float(np.max(np.abs(np.concatenate([h, e, [0.0]]))))
    if E.shape[0] == 0 and np.all(G @ y <= h):
        return y
    best = None
    rows = range(G.shape[0])
    for size in range(G.shape[0] + 1):
        for A in itertools.combinations(rows, size):
            M = np.vstack([E, G[list(A)]])
            rhs = np.concatenate([e, h[list(A)]])
            if M.shape[0] == 0:
                continue
            K = M @ M.T
            if np.linalg.matrix_rank(K) < K.shape[0]:
                continue
            lam = np.linalg.solve(K, M @ y - rhs)
            if size and np.any(lam[E.shape[0]:] < -1e-12):
                continue
            w = y - M.T @ lam
            if np.all(G @ w <= h + 1e-12 * scale):
                d = float(np.linalg.norm(w - y))
                if best is None or d < best[0]:
                    best = (d, w)
        if best is not None:
            return best[1]
    raise ValueError("projection failed: region empty or rows degenerate")


@dataclass
class QPOracleResult:
    w: np.ndarray
    value: float
    iterations: int


def qp_projected_gradient(cov, G, h, E=None, e=None, w0=None, tol=1e-15,
                          max_iter=2_000_000) -> QPOracleResult:
    """``min w' cov w`` over ``{G w <= h, E w = e}`` by FISTA with adaptive restart."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    G = np.asarray(G, dtype=float).reshape(-1, n)
    h = np.asarray(h, dtype=float)
    E = np.zeros((0, n)) if E is None else np.asarray(E, dtype=float).reshape(-1, n)
    e = np.zeros(0) if e is None else np.asarray(e, dtype=float)
    step = 1.0 / (2.0 * float(np.linalg.eigvalsh(cov)[-1]))
    x = _project_polyhedron(np.zeros(n) if w0 is None else np.asarray(w0, float), G, h, E, e)
    y, t = x.copy(), 1.0
    fx = float(x @ cov @ x)
    it = 0
    restarted = False
    for it in range(1, max_iter + 1):
        x_new = _project_polyhedron(y - step * 2.0 * (cov @ y), G, h, E, e)
        f_new = float(x_new @ cov @ x_new)
        moved = float(np.linalg.norm(x_new - x))
        if moved <= tol * (1.0 + float(np.linalg.norm(x))):
            break
        if f_new > fx:
            if restarted:
                break
            # restart momentum
            y, t, restarted = x.copy(), 1.0, True
            continue
        restarted = False
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
    return QPOracleResult(x, fx, it)


def region_rows(s0, mean, alpha_tilde, epsilon):
    """``G w <= h`` rows of the two admissibility constraints."""
    G = np.vstack([np.asarray(s0, float), -np.asarray(mean, float)])
    h = np.array([-epsilon, -alpha_tilde], dtype=float)
    return G, h


def restriction_rows(rs: RestrictionSet, n: int, support=None, signs=None, small=(),
                     threshold=0.0):
    """Linear rows of a restriction set on one support / sign pattern.

    Written independently of the solver's region builder: floors and caps
    become coordinate bounds, groups two halfspaces each, positions outside
    ``support`` are pinned to zero and held ones to ``|w_j| >= min_position``
    with the sign in ``signs``.  Positions in ``small`` (uncounted by the
    cardinality limit) are kept within ``|w_j| <= threshold``.
    """
    G, h, E, e = [], [], [], []
    M = rs.big_M
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    if rs.short_floors is not None:
        lo = np.maximum(lo, np.array(rs.short_floors, dtype=float))
    if rs.max_position is not None:
        lo = np.maximum(lo, -rs.max_position)
        hi = np.minimum(hi, rs.max_position)
    if support is not None:
        off = np.setdiff1d(np.arange(n), support)
        lo[off] = np.maximum(lo[off], 0.0)
        hi[off] = np.minimum(hi[off], 0.0)
    if signs is not None and rs.min_position:
        for j, s in zip(support, signs):
            if s > 0:
                lo[j] = max(lo[j], rs.min_position)
            else:
                hi[j] = min(hi[j], -rs.min_position)
    for j in small:
        lo[j] = max(lo[j], -threshold)
        hi[j] = min(hi[j], threshold)
    for j in range(n):
        if lo[j] == hi[j]:
            E.append(np.eye(n)[j])
            e.append(lo[j])
            continue
        if np.isfinite(hi[j]) and hi[j] < M:
            G.append(np.eye(n)[j])
            h.append(hi[j])
        if np.isfinite(lo[j]) and lo[j] > -M:
            G.append(-np.eye(n)[j])
            h.append(-lo[j])
    for idx, cap in rs.groups:
        v = np.zeros(n)
        v[list(idx)] = 1.0
        if cap >= M * n:
            continue
        G += [v, -v]
        h += [cap, cap]
    G = np.array(G, dtype=float).reshape(-1, n)
    E = np.array(E, dtype=float).reshape(-1, n)
    return G, np.array(h, dtype=float), E, np.array(e, dtype=float)


@dataclass
class GridResult:
    objective: float  # -inf when a scale-closed region admits a negative value
    w: np.ndarray | None
    grid_best: float
    feasible_points: int


def _objective(cov, delta, sign):
    sd = sign * math.sqrt(delta)

    def f(w):
        return math.sqrt(max(float(w @ cov @ w), 0.0)) + sd * float(np.linalg.norm(w))

    return f


def grid_search(cov, s0, mean, alpha_tilde, epsilon, specs, box=5.0, step=1e-3,
                restrictions: RestrictionSet | None = None, threshold=None, top_k=32, n_refine=3,
                chunk=1_000_000, scale_closed=None):
    """Dense grid plus local refinement for several ``(delta, sign)`` objectives.

    ``sign=+1`` is the worst-case objective, ``-1`` the best-case one.  The
    grid ``{-box, -box+step, ..., box}^n`` contains 0 in every coordinate, so
    cardinality and minimum-position patterns with zero weights are
    represented exactly.  Up to ``n_refine`` well-separated points among the
    best ``top_k`` grid points per objective are refined by COBYLA inside
    the convex piece (support and sign pattern) they belong to.  Returns
    one GridResult per entry of ``specs``.
    """
    cov = np.asarray(cov, float)
    s0 = np.asarray(s0, float)
    mean = np.asarray(mean, float)
    n = s0.shape[0]
    rs = restrictions or RestrictionSet()
    thr = epsilon if threshold is None else threshold
    if scale_closed is None:
        scale_closed = rs.is_empty(n) and alpha_tilde >= 0
    m = int(round(box / step))
    axis = np.arange(-m, m + 1) * step
    total = axis.size**n
    L = np.linalg.cholesky(cov)
    keep = [[] for _ in specs]
    count = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        W = np.stack(np.unravel_index(idx, (axis.size,) * n), axis=1)
        W = axis[W]
        ok = (W @ s0 <= -epsilon) & (W @ mean >= alpha_tilde)
        if not rs.is_empty(n):
            ok &= satisfies_many(rs, W, thr, 0.0)
        W = W[ok]
        if W.shape[0] == 0:
            continue
        count += W.shape[0]
        sig = np.linalg.norm(W @ L, axis=1)
        nrm = np.linalg.norm(W, axis=1)
        for k, (delta, sign) in enumerate(specs):
            vals = sig + sign * math.sqrt(delta) * nrm
            top = np.argpartition(vals, top_k)[:top_k] if vals.size > top_k else np.arange(vals.size)
            keep[k].extend((float(vals[i]), W[i].copy()) for i in top)
    out = []
    for k, (delta, sign) in enumerate(specs):
        if not keep[k]:
            out.append(GridResult(math.inf, None, math.inf, 0))
            continue
        keep[k].sort(key=lambda p: p[0])
        cands = []
        for v, w in keep[k]:
            # neighbouring grid points lead to the same local minimum
            if all(np.max(np.abs(w - c)) > 3 * step for _, c in cands):
                cands.append((v, w))
            if len(cands) == n_refine:
                break
        grid_best = cands[0][0]
        if grid_best < 0 and scale_closed:
            out.append(GridResult(-math.inf, cands[0][1], grid_best, count))
            continue
        f = _objective(cov, delta, sign)
        best = (grid_best, cands[0][1])
        for _, w0 in cands:
            w = _refine(f, w0, s0, mean, alpha_tilde, epsilon, rs, step, thr)
            if w is not None and f(w) < best[0]:
                best = (f(w), w)
        out.append(GridResult(best[0], best[1], grid_best, count))
    return out


def _refine(f, w0, s0, mean, alpha_tilde, epsilon, rs, step, thr):
    n = w0.shape[0]
    support = np.flatnonzero(w0 != 0) if _nonconvex(rs, n) else None
    signs = np.sign(w0[support]) if support is not None else None
    limited = rs.cardinality is not None and rs.cardinality < n
    # uncounted positions must stay below the threshold so the count cannot grow
    small = np.flatnonzero((w0 != 0) & (np.abs(w0) <= thr)) if limited else ()
    if limited and not rs.min_position:
        # zeros are uncounted too and may move within the threshold band
        small = np.flatnonzero(np.abs(w0) <= thr)
        support = np.union1d(support, small)
    G0, h0 = region_rows(s0, mean, alpha_tilde, epsilon)
    G1, h1, E, e = restriction_rows(rs, n, support, signs, small, thr)
    G = np.vstack([G0, G1])
    h = np.concatenate([h0, h1])
    cons = [{"type": "ineq", "fun": lambda w: h - G @ w}]
    if E.shape[0]:
        cons.append({"type": "ineq", "fun": lambda w: e - E @ w})
        cons.append({"type": "ineq", "fun": lambda w: E @ w - e})
    w = w0
    for rho in (step, step * 1e-2, step * 1e-4):
        # restarts with a smaller trust radius help on ill-conditioned covariances
        w = minimize(f, w, method="COBYLA", constraints=cons,
                     options={"rhobeg": rho, "tol": rho * 1e-7, "maxiter": 20000}).x
    if support is not None:
        w = w.copy()
        w[np.setdiff1d(np.arange(n), support)] = 0.0
    viol = max(float(np.max(G @ w - h, initial=0.0)), float(np.max(np.abs(E @ w - e), initial=0.0)))
    if viol > 1e-10 or not satisfies_many(rs, w[None, :], thr, 1e-10)[0]:
        return None
    return w


def _nonconvex(rs, n):
    return bool(rs.min_position) or (rs.cardinality is not None and rs.cardinality < n)


def cone_rayleigh_min(cov, s0, mean):
    """``min w'cov w / ||w||^2`` over ``{s0.w <= 0, mean.w >= 0}``.

    Every constrained stationary point is an eigenvector of the covariance
    compressed to the subspace cut out by some set of active constraints,
    so enumerating those eigenvectors (both signs) and keeping the feasible
    ones gives the exact minimum.
    """
    cov = np.asarray(cov, float)
    rows = [np.asarray(s0, float), -np.asarray(mean, float)]
    best = math.inf
    for size in range(3):
        for A in itertools.combinations(range(2), size):
            B = null_space(np.array([rows[i] for i in A])) if A else np.eye(cov.shape[0])
            if B.shape[1] == 0:
                continue
            lam, V = np.linalg.eigh(B.T @ cov @ B)
            for j in range(lam.size):
                u = B @ V[:, j]
                for s in (1.0, -1.0):
                    if all(r @ (s * u) <= 1e-12 for r in rows):
                        best = min(best, float(lam[j]))
    return best


__all__ = ["GridResult", "QPOracleResult", "cone_rayleigh_min", "grid_search",
           "qp_projected_gradient", "region_rows", "restriction_rows"]
