"""Outer portfolio problems over the admissible region.

Worst case (convex, second-order-cone representable)::

    min  sqrt(w' S w) + sqrt(delta) ||w||    over the region

Best case (non-convex), minimised without the square-and-floor, which is a
monotone transformation applied afterwards::

    min  sqrt(w' S w) - sqrt(delta) ||w||
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.stats import qmc

from ..errors import InfeasibleRegion, NumericalFailure
from ..market_data import Moments
from ..robust_variance import Portfolio, _delta
from .local import (LocalResult, barrier_minimize, in_z, phase_one, robust_std_objective,
                    slsqp_minimize)
from .region import FeasibleRegion, ReducedRegion, SolverResult

log = logging.getLogger(__name__)

KKT_TOL = 1e-6
DEFAULT_STARTS = 16


def _reduced_pieces(fr: FeasibleRegion):
    pieces = []
    for lr in fr.linear_regions():
        try:
            pieces.append(lr.reduce())
        except InfeasibleRegion:
            continue
    return pieces


def _result(fr, m, w, objective, status, kkt, restarts, flags=()):
    value = max(objective, 0.0) ** 2 if math.isfinite(objective) else 0.0
    return SolverResult(Portfolio(w), float(objective), float(value), status, float(kkt), restarts,
                        float(fr.scen_mean @ w), tuple(flags))


def _solve_convex_piece(fz, red: ReducedRegion) -> LocalResult:
    z0, slack = phase_one(red.G, red.h)
    if slack > 0 or red.G.shape[0] == 0:
        try:
            res = barrier_minimize(fz, red.G, red.h, z0)
            if res.converged and res.kkt <= KKT_TOL:
                return res
            log.info("barrier method did not certify optimality (kkt=%.2e); trying SQP", res.kkt)
        except (NumericalFailure, np.linalg.LinAlgError) as exc:
            log.info("barrier method failed (%s); trying SQP", exc)
            res = None
    else:
        res = None
    alt = slsqp_minimize(fz, red.G, red.h, z0, convex=True)
    if res is None or alt.kkt < res.kkt:
        return alt
    return res


def solve_wc(m: Moments, d, fr: FeasibleRegion, raise_on_infeasible: bool = True) -> SolverResult:
    """Minimise ``sqrt(w'Sw) + sqrt(delta)||w||`` over the region.

    The value is the squared optimum, i.e. the worst-case robust variance of
    the best admissible portfolio.
    """
    delta = _delta(d)
    fun = robust_std_objective(m.cov, delta, +1.0)
    best = None
    pieces = _reduced_pieces(fr)
    for red in pieces:
        try:
            res = _solve_convex_piece(in_z(fun, red), red)
        except InfeasibleRegion:
            continue
        if best is None or res.f < best[1].f:
            best = (red, res)
    if best is None:
        if raise_on_infeasible:
            raise InfeasibleRegion("no portfolio satisfies the admissibility constraints")
        return SolverResult.infeasible()
    red, res = best
    w = red.to_w(res.z)
    status = "optimal" if res.kkt <= KKT_TOL else "max_iter"
    return _result(fr, m, w, res.f, status, res.kkt, len(pieces))


def _start_points(red: ReducedRegion, z_int: np.ndarray, n_starts: int, seed, piece: int):
    k = red.k
    starts = [z_int]
    if k == 0 or n_starts <= 1:
        return starts[:max(n_starts, 1)]
    ss = np.random.SeedSequence([int(seed), piece])
    halton = qmc.Halton(d=k + 1, scramble=True, seed=np.random.default_rng(ss))
    u = halton.random(n_starts - 1)
    s = red.slack(z_int)
    reach = 10.0 * max(float(np.linalg.norm(z_int)), float(np.max(np.abs(red.h))) if red.h.size else 1.0, 1e-12)
    for row in u:
        d = 2.0 * row[:k] - 1.0
        nd = float(np.linalg.norm(d))
        if nd == 0:
            continue
        d /= nd
        Gd = red.G @ d
        pos = Gd > 0
        step = float(np.min(s[pos] / Gd[pos])) if np.any(pos) else reach
        starts.append(z_int + 0.999 * row[k] * min(step, reach) * d)
    return starts


def _canonical_witness(red: ReducedRegion, w: np.ndarray) -> np.ndarray:
    """Shrink a scale-closed witness until its first constraint becomes active."""
    G, h = red.parent.G, red.parent.h
    Gw = G @ w
    neg = Gw < 0
    if not np.any(neg):
        return w
    c = float(np.max(h[neg] / Gw[neg]))
    return w * c if c > 0 else w


def solve_bc_multistart(m: Moments, d, fr: FeasibleRegion, n_starts: int = DEFAULT_STARTS,
                        seed: int = 0, warm_starts=(), raise_on_infeasible: bool = True) -> SolverResult:
    """Minimise ``sqrt(w'Sw) - sqrt(delta)||w||`` by seeded multistart local search.

    Starting points are an interior point from a phase-one LP plus a scrambled
    Halton sequence of directions, each pushed a random fraction of the way
    to the region boundary.  At ``delta = 0`` the problem is the convex
    minimum-variance one and is delegated to :func:`solve_wc`.
    A feasible ``w`` with negative objective on a scale-closed region proves
    the infimum is ``-inf``; the result then has status ``unbounded`` and
    value 0.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    delta = _delta(d)
    if delta == 0.0:
        return solve_wc(m, 0.0, fr, raise_on_infeasible=raise_on_infeasible)
    fun = robust_std_objective(m.cov, delta, -1.0)
    pieces = _reduced_pieces(fr)
    best = None
    restarts = 0
    flags = []
    for idx, red in enumerate(pieces):
        try:
            z_int, _ = phase_one(red.G, red.h)
        except InfeasibleRegion:
            continue
        fz = in_z(fun, red)
        starts = []
        for ws in warm_starts:
            z = red.to_z(ws.w if isinstance(ws, Portfolio) else ws)
            if np.all(red.slack(z) >= -1e-9 * (1 + np.linalg.norm(z))):
                starts.append(z)
        starts += _start_points(red, z_int, n_starts, seed, idx)
        closed = red.parent.scale_closed
        cap = 1e6 * max(float(np.linalg.norm(z_int)), 1e-12)
        for z0 in starts:
            restarts += 1
            if closed and fz(z0)[0] < 0:
                w = _canonical_witness(red, red.to_w(z0))
                return _result(fr, m, w, -math.inf, "unbounded", 0.0, restarts)
            res = slsqp_minimize(fz, red.G, red.h, z0, norm_cap=cap)
            if res.f < 0 and (closed or np.linalg.norm(res.z) >= 0.999 * cap):
                w = _canonical_witness(red, red.to_w(res.z)) if closed else red.to_w(res.z)
                return _result(fr, m, w, -math.inf, "unbounded", 0.0, restarts)
            if best is None or res.f < best[1].f - 1e-14 * abs(best[1].f):
                best = (red, res)
    if best is None:
        if raise_on_infeasible:
            raise InfeasibleRegion("no portfolio satisfies the admissibility constraints")
        return SolverResult.infeasible(restarts)
    red, res = best
    status = "optimal" if res.kkt <= KKT_TOL else "max_iter"
    return _result(fr, m, red.to_w(res.z), res.f, status, res.kkt, restarts, flags)
