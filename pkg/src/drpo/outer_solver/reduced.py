"""Best-case problem through active-set reduction and a one-dimensional search.

Writing the region as ``a.w >= 1, b.w >= 1`` with ``a = -s0/epsilon`` and
``b = mean/alpha_tilde``, any minimiser with positive objective has at least
one active constraint.  Fixing the active ones leaves an affine family
``w = w_p + Z x``; on it the variance and the squared norm are quadratics
``q1(x)`` and ``q2(x)``, and

    min sqrt(q1) - sqrt(delta q2)  =  min_t  sqrt(f(t)) - sqrt(delta t),
    f(t) = min { q1(x) : q2(x) = t }.

``f`` is evaluated exactly by diagonalising the pencil (Q1, Q2) and solving
the secular equation of the resulting sphere-constrained quadratic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.optimize import brentq

from ..errors import (BadNormalization, DegenerateConstraints, InfeasibleRegion, NumericalFailure,
                      RangeError)
from ..market_data import Moments
from ..robust_variance import Portfolio, _delta
from .region import FeasibleRegion, SolverResult
from .solve import DEFAULT_STARTS, solve_bc_multistart

log = logging.getLogger(__name__)

CASES = ("both_active", "first_active", "second_active")
GOLDEN_RTOL = 1e-8


@dataclass(frozen=True)
class Quadratic:
    """``q(x) = x'Qx + 2 l'x + c``."""

    Q: np.ndarray
    l: np.ndarray
    c: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + 2 * self.l @ x + self.c)


@dataclass(frozen=True)
class ReducedProblem:
    a: np.ndarray
    b: np.ndarray
    case: str
    w_p: np.ndarray  # particular point of the active equalities
    Z: np.ndarray  # n x k orthonormal basis of their null space
    q1: Quadratic
    q2: Quadratic

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    def to_w(self, x) -> np.ndarray:
        return self.w_p + self.Z @ np.asarray(x, dtype=float)

    @property
    def t_min(self) -> float:
        """Smallest attainable value of ``q2``."""
        return _pencil(self).floor


def reduce_constraints(a, b, cov, case: str) -> ReducedProblem:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = a.shape[0]
    if case == "both_active":
        A = np.vstack([a, b])
        if n < 2 or np.linalg.matrix_rank(A, tol=1e-12 * np.linalg.norm(A)) < 2:
            raise DegenerateConstraints("normalised constraint vectors are parallel")
    elif case == "first_active":
        A = a[None, :]
    elif case == "second_active":
        A = b[None, :]
    else:
        raise ValueError(f"unknown active-set case {case!r}")
    if not np.any(A):
        raise DegenerateConstraints("zero constraint vector")
    w_p = np.linalg.pinv(A) @ np.ones(A.shape[0])
    Z = null_space(A)
    q1 = Quadratic(Z.T @ cov @ Z, Z.T @ cov @ w_p, float(w_p @ cov @ w_p))
    q2 = Quadratic(Z.T @ Z, Z.T @ w_p, float(w_p @ w_p))
    return ReducedProblem(a, b, case, w_p, Z, q1, q2)


def normalized_constraints(fr: FeasibleRegion):
    if not fr.alpha_tilde > 0:
        raise BadNormalization("the normalised form needs alpha_tilde > 0")
    return -fr.s0 / fr.epsilon, fr.scen_mean / fr.alpha_tilde


def reduce_active_set(fr: FeasibleRegion, case: str, cov) -> ReducedProblem:
    """Eliminate the constraints that ``case`` declares active."""
    a, b = normalized_constraints(fr)
    return reduce_constraints(a, b, cov, case)


@dataclass(frozen=True)
class _Pencil:
    lam: np.ndarray  # generalised eigenvalues of (Q1, Q2), ascending
    V: np.ndarray  # x = centre + V y, V' Q2 V = I
    g: np.ndarray  # linear term of q1 in y
    centre: np.ndarray
    q1_centre: float
    floor: float  # q2 at the centre


def _pencil(rp: ReducedProblem) -> _Pencil:
    q1, q2 = rp.q1, rp.q2
    k = rp.k
    if k == 0:
        return _Pencil(np.zeros(0), np.zeros((0, 0)), np.zeros(0), np.zeros(0), q1.c, q2.c)
    centre = -np.linalg.solve(q2.Q, q2.l)
    floor = q2(centre)
    lam, V = eigh(q1.Q, q2.Q)
    g = V.T @ (q1.Q @ centre + q1.l)
    return _Pencil(lam, V, g, centre, q1(centre), floor)


def _sphere_min(lam, g, r):
    """Global minimiser of ``sum lam_i y_i^2 + 2 g.y`` on ``||y|| = r``."""
    if r == 0.0:
        return np.zeros_like(g)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    near = lam <= lam[0] + 1e-12 * scale
    gJ = float(np.linalg.norm(g[near]))
    gn = float(np.linalg.norm(g))

    def norm_y(mu):
        return float(np.linalg.norm(g / (lam + mu)))

    hard = gJ <= 1e-13 * max(gn, 1e-300) or gJ == 0.0
    if hard:
        rest = ~near
        y = np.zeros_like(g)
        y[rest] = -g[rest] / (lam[rest] - lam[0])
        r_hard = float(np.linalg.norm(y))
        if r >= r_hard:
            y[np.argmax(near)] = math.sqrt(max(r * r - r_hard * r_hard, 0.0))
            return y
        g = np.where(near, 0.0, g)
        lo = -lam[0] + 1e-15 * scale
    else:
        # each -lam_i + |g_i|/r above the pole is a point where ||y|| >= r
        cands = -lam + np.abs(g) / r
        valid = cands > -lam[0]
        lo = float(np.max(cands[valid])) if np.any(valid) else -lam[0] + 1e-15 * scale
    hi = -lam[0] + gn / r
    if norm_y(hi) >= r:
        mu = hi
    elif norm_y(lo) <= r:
        mu = lo
    else:
        mu = brentq(lambda u: norm_y(u) - r, lo, hi, xtol=1e-15 * (abs(lo) + abs(hi)),
                    rtol=1e-15, maxiter=500)
    return -g / (lam + mu)


def level_minimizer(rp: ReducedProblem, t: float):
    """``(f(t), x)`` with ``x`` the global minimiser of ``q1`` on ``q2 = t``."""
    p = _pencil(rp)
    r2 = t - p.floor
    tol = 1e-12 * max(abs(t), abs(p.floor), 1e-300)
    if r2 < -tol:
        raise RangeError(f"t={t!r} is below the attainable minimum {p.floor!r} of q2")
    if rp.k == 0:
        return float(p.q1_centre), np.zeros(0)
    y = _sphere_min(p.lam, p.g, math.sqrt(max(r2, 0.0)))
    x = p.centre + p.V @ y
    return rp.q1(x), x


def f_of_t(rp: ReducedProblem, t: float) -> float:
    """Optimal value of ``min q1(x) s.t. q2(x) = t``."""
    return level_minimizer(rp, t)[0]


@dataclass
class CaseResult:
    case: str
    w: np.ndarray | None
    objective: float
    unbounded: bool
    valid: bool
    multipliers: np.ndarray
    residual: float
    reason: str = ""


def _golden(fun, lo, hi, rtol=GOLDEN_RTOL, max_iter=400):
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if hi - lo <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def min_over_t(rp: ReducedProblem, delta: float, sweep: int = 240):
    """Minimise ``sqrt(f(t)) - sqrt(delta t)`` over attainable ``t``.

    A geometric sweep of ``t - t_min`` brackets the minimum, then golden
    section refines it.  Returns ``(t, value, x, unbounded)``; ``unbounded``
    is set when the sweep finds a negative value still decreasing at its
    far end, which proves the infimum is ``-inf`` on this piece.
    """
    p = _pencil(rp)
    t0 = p.floor

    def h(t):
        return math.sqrt(max(f_of_t(rp, t), 0.0)) - math.sqrt(delta * t)

    if rp.k == 0:
        val, x = level_minimizer(rp, t0)
        return t0, math.sqrt(max(val, 0.0)) - math.sqrt(delta * t0), x, False
    y_free = -p.g / np.where(p.lam > 0, p.lam, np.inf)
    span = max(t0, float(y_free @ y_free), 1e-300)
    taus = np.concatenate([[0.0], np.geomspace(1e-12 * span, 1e10 * span, sweep)])
    ts = t0 + taus
    vals = np.array([h(t) for t in ts])
    k = int(np.argmin(vals))
    if k == len(ts) - 1 and vals[k] < 0 and vals[k] < vals[k - 1]:
        _, x = level_minimizer(rp, ts[k])
        return ts[k], -math.inf, x, True
    lo = ts[max(k - 1, 0)]
    hi = ts[min(k + 1, len(ts) - 1)]
    t_best, v_best = _golden(h, lo, hi)
    if vals[k] < v_best:
        t_best, v_best = ts[k], vals[k]
    _, x = level_minimizer(rp, t_best)
    return t_best, v_best, x, False


def _grad(cov, delta, w):
    Sw = cov @ w
    return Sw / math.sqrt(w @ Sw) - math.sqrt(delta) * w / np.linalg.norm(w)


def _solve_case(cov, delta, a, b, case) -> CaseResult:
    try:
        rp = reduce_constraints(a, b, cov, case)
    except DegenerateConstraints as exc:
        return CaseResult(case, None, math.inf, False, False, np.zeros(0), math.inf, str(exc))
    t, val, x, unbounded = min_over_t(rp, delta)
    w = rp.to_w(x)
    feas_tol = 1e-9
    feasible = a @ w >= 1 - feas_tol and b @ w >= 1 - feas_tol
    if unbounded:
        return CaseResult(case, w, -math.inf, True, feasible, np.zeros(0), 0.0,
                          "" if feasible else "witness violates the inactive constraint")
    normals = {"both_active": [a, b], "first_active": [a], "second_active": [b]}[case]
    A = np.array(normals).T
    g = _grad(cov, delta, w)
    beta, *_ = np.linalg.lstsq(A, g, rcond=None)
    gn = float(np.linalg.norm(g))
    resid = float(np.linalg.norm(A @ beta - g)) / max(gn, 1e-300)
    beta_scaled = beta * np.linalg.norm(A, axis=0) / max(gn, 1e-300)
    reason = ""
    if not feasible:
        reason = "inactive constraint violated"
    elif np.any(beta_scaled < -1e-7):
        reason = "negative multiplier"
    elif resid > 1e-4:
        reason = f"stationarity residual {resid:.1e}"
    return CaseResult(case, w, val, False, not reason, beta, resid, reason)


def solve_bc_sdp_path(m: Moments, d, fr: FeasibleRegion, n_starts: int = DEFAULT_STARTS,
                      seed: int = 0) -> SolverResult:
    """Best-case outer problem via the three active-set cases and a 1-D search.

    Falls back to :func:`solve_bc_multistart` (flagged ``fallback``) when
    restrictions are present, ``alpha_tilde <= 0``, or no case passes its
    feasibility and multiplier-sign checks.
    """
    delta = _delta(d)

    def fallback(why):
        log.warning("one-dimensional search path unavailable (%s); using multistart", why)
        res = solve_bc_multistart(m, delta, fr, n_starts=n_starts, seed=seed)
        res.flags = tuple(res.flags) + ("fallback",)
        return res

    if not fr.restrictions.is_empty(fr.n):
        return fallback("portfolio restrictions are not supported on this path")
    try:
        a, b = normalized_constraints(fr)
    except BadNormalization as exc:
        return fallback(str(exc))
    results = [_solve_case(m.cov, delta, a, b, case) for case in CASES]
    for r in results:
        log.debug("case %s: objective=%r valid=%s %s", r.case, r.objective, r.valid, r.reason)
    valid = [r for r in results if r.valid]
    if not valid:
        return fallback("no active-set case produced valid multipliers")
    best = valid[0]
    for r in valid[1:]:
        # ties go to the earlier (more constrained) case
        if r.objective < best.objective - 1e-12 * max(abs(best.objective), 1e-300):
            best = r
    w = best.w
    if best.unbounded:
        status, kkt = "unbounded", 0.0
    else:
        kkt = best.residual
        status = "optimal" if kkt <= 1e-6 else "max_iter"
    obj = best.objective
    value = max(obj, 0.0) ** 2 if math.isfinite(obj) else 0.0
    return SolverResult(Portfolio(w), float(obj), float(value), status, float(kkt), 0,
                        float(fr.scen_mean @ w), (f"case={best.case}",))


__all__ = ["CASES", "CaseResult", "Quadratic", "ReducedProblem", "f_of_t", "level_minimizer",
           "min_over_t", "reduce_active_set", "reduce_constraints", "solve_bc_sdp_path"]
