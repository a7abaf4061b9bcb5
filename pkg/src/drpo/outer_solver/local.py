"""Local solvers over a reduced polyhedron ``G z <= h``.

``barrier_minimize`` is a log-barrier interior-point method for the convex
worst-case objective, ``slsqp_minimize`` a sequential quadratic programming
local search used by the best-case multistart.  Both finish with an
active-set Newton polish when it verifiably improves the point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize

from ..errors import InfeasibleRegion, NumericalFailure

log = logging.getLogger(__name__)


def robust_std_objective(cov: np.ndarray, delta: float, sign: float):
    """``f(w) = sqrt(w' cov w) + sign * sqrt(delta) * ||w||`` with gradient and Hessian."""
    sd = sign * math.sqrt(delta)
    n = cov.shape[0]
    eye = np.eye(n)

    def fun(w, value_only=False):
        Sw = cov @ w
        var = float(w @ Sw)
        sig = math.sqrt(max(var, 1e-300))
        nw = max(float(np.linalg.norm(w)), 1e-300)
        f = sig + sd * nw
        if value_only:
            return f
        g = Sw / sig + sd * w / nw
        H = (cov - np.outer(Sw, Sw) / max(var, 1e-300)) / sig
        if sd:
            H = H + sd * (eye - np.outer(w, w) / nw**2) / nw
        return f, g, H

    return fun


def in_z(fun, red):
    N, x0 = red.N, red.x0

    def fz(z):
        f, g, H = fun(x0 + N @ z)
        return f, N.T @ g, N.T @ H @ N

    fz.value = lambda z: fun(x0 + N @ z, value_only=True)
    return fz


@dataclass
class LocalResult:
    z: np.ndarray
    f: float
    kkt: float
    lam: np.ndarray
    converged: bool
    polished: bool = False


def phase_one(G: np.ndarray, h: np.ndarray):
    """Compact strictly interior point of ``G z <= h`` (unit rows).

    Returns ``(z, slack)``; ``slack <= 0`` means the polyhedron has no
    interior.  Raises InfeasibleRegion when it is empty.
    """
    m, k = G.shape
    if m == 0:
        return np.zeros(k), math.inf
    cap = max(float(np.max(np.abs(h))), 1e-12) if np.any(h) else 1.0
    if k == 0:
        s = float(np.min(h))
        if s < -1e-12 * (1 + cap):
            raise InfeasibleRegion("region is empty")
        return np.zeros(0), s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A = np.hstack([G, np.ones((m, 1))])
    bounds = [(None, None)] * k + [(None, cap)]
    res = linprog(c, A_ub=A, b_ub=h, bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericalFailure(f"phase-one LP failed: {res.message}")
    s_star = float(res.x[-1])
    if s_star < -1e-10 * cap:
        raise InfeasibleRegion("region is empty")
    if s_star <= 1e-10 * cap:
        return res.x[:k], s_star
    # second LP: smallest l1 point keeping half the achievable slack
    c2 = np.concatenate([np.zeros(k), np.ones(k)])
    I = np.eye(k)
    A2 = np.vstack([np.hstack([G, np.zeros((m, k))]), np.hstack([I, -I]), np.hstack([-I, -I])])
    b2 = np.concatenate([h - 0.5 * s_star, np.zeros(2 * k)])
    res2 = linprog(c2, A_ub=A2, b_ub=b2, bounds=[(None, None)] * k + [(0, None)] * k, method="highs")
    z = res2.x[:k] if res2.status == 0 else res.x[:k]
    return z, float(np.min(h - G @ z))


def _solve_psd(H, g):
    try:
        L = np.linalg.cholesky(H)
        return -np.linalg.solve(L.T, np.linalg.solve(L, g))
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(H)
        floor = max(1e-14 * max(abs(w[-1]), 1e-300), 1e-300)
        return -V @ ((V.T @ g) / np.maximum(w, floor))


def _center(fz, G, h, z, t, max_iter=100):
    def phi(zz):
        s = h - G @ zz
        if np.any(s <= 0):
            return math.inf
        return t * fz.value(zz) - float(np.sum(np.log(s)))

    cur = phi(z)
    for _ in range(max_iter):
        f, g, H = fz(z)
        s = h - G @ z
        d = 1.0 / s
        grad = t * g + G.T @ d
        hess = t * H + (G.T * d**2) @ G
        dz = _solve_psd(hess, grad)
        dec = float(-grad @ dz)
        if dec / 2 <= 1e-10:
            return z, True
        Gd = G @ dz
        pos = Gd > 0
        step = min(1.0, 0.99 * float(np.min(s[pos] / Gd[pos]))) if np.any(pos) else 1.0
        while step > 1e-16:
            new = phi(z + step * dz)
            if new <= cur - 0.25 * step * dec + 1e-14 * abs(cur):
                break
            step *= 0.5
        else:
            return z, False
        z = z + step * dz
        cur = new
    return z, False


def active_multipliers(g, G, active):
    """Least-squares multipliers for ``g + G_A' lam = 0``."""
    lam = np.zeros(G.shape[0])
    if np.any(active):
        la, *_ = np.linalg.lstsq(G[active].T, -g, rcond=None)
        lam[active] = la
    return lam


def kkt_residual(f, g, G, h, z, lam) -> float:
    """Scale-free KKT violation: stationarity, complementarity, dual and primal feasibility."""
    gn = max(float(np.linalg.norm(g)), 1e-300)
    s = h - G @ z
    stat = float(np.linalg.norm(g + G.T @ lam)) / gn if G.size else float(np.linalg.norm(g)) / gn
    comp = float(np.max(np.abs(lam * s))) / max(abs(f), 1e-300) if lam.size else 0.0
    dual = max(0.0, -float(np.min(lam))) / gn if lam.size else 0.0
    scale = 1.0 + float(np.linalg.norm(z))
    primal = max(0.0, -float(np.min(s))) / scale if s.size else 0.0
    return max(stat, comp, dual, primal)


def _polish(fz, G, h, z, active, convex: bool):
    """Newton iterations on ``min f s.t. G_A z = h_A``; None unless verifiably better."""
    k = z.shape[0]
    GA, hA = G[active], h[active]
    if GA.shape[0]:
        zp = z - np.linalg.pinv(GA) @ (GA @ z - hA)
        NA = null_space(GA)
    else:
        zp, NA = z.copy(), np.eye(k)
    for _ in range(50):
        f, g, H = fz(zp)
        if NA.shape[1] == 0:
            break
        gr = NA.T @ g
        Hr = NA.T @ H @ NA
        evals = np.linalg.eigvalsh(Hr)
        if evals[0] <= 1e-12 * max(abs(evals[-1]), 1e-300):
            if not convex:
                return None
        dy = _solve_psd(Hr, gr)
        if float(np.linalg.norm(NA @ dy)) <= 1e-15 * (1 + float(np.linalg.norm(zp))):
            break
        step = 1.0
        while step > 1e-10:
            cand = zp + step * (NA @ dy)
            if fz(cand)[0] <= f + 1e-4 * step * float(gr @ dy) + 1e-15 * abs(f):
                break
            step *= 0.5
        zp = cand
    f, g, _ = fz(zp)
    s = h - G @ zp
    scale = 1.0 + float(np.linalg.norm(zp)) + float(np.max(np.abs(h))) if h.size else 1.0
    if s.size and np.min(s) < -1e-12 * scale:
        return None
    lam = active_multipliers(g, G, active)
    gn = max(float(np.linalg.norm(g)), 1e-300)
    if lam.size and np.min(lam) < -1e-9 * gn:
        return None
    return zp, f, lam


def _finish(fz, G, h, z, lam_est, convex):
    """Polish ``z`` if possible and return a LocalResult with KKT data."""
    f, g, _ = fz(z)
    s = h - G @ z
    gn = max(float(np.linalg.norm(g)), 1e-300)
    zs = 1.0 + float(np.linalg.norm(z))
    if lam_est is None:
        active = s <= 1e-7 * zs
        lam_est = active_multipliers(g, G, active)
    else:
        active = lam_est / gn > s / zs
    base_kkt = kkt_residual(f, g, G, h, z, lam_est)
    best = LocalResult(z, f, base_kkt, lam_est, True)
    pol = _polish(fz, G, h, z, active, convex)
    if pol is not None:
        zp, fp, lam = pol
        kp = kkt_residual(fp, fz(zp)[1], G, h, zp, lam)
        if fp <= f + 1e-13 * abs(f) and kp <= max(base_kkt, 1e-8):
            best = LocalResult(zp, fp, kp, lam, True, polished=True)
    return best


def barrier_minimize(fz, G, h, z0, gap_tol=1e-10, mu=10.0, max_outer=60) -> LocalResult:
    """Log-barrier interior-point method from a strictly feasible ``z0``."""
    m = G.shape[0]
    z = np.asarray(z0, dtype=float)
    if z.shape[0] == 0:
        f, g, _ = fz(z)
        lam = np.zeros(m)
        return LocalResult(z, f, 0.0, lam, True)
    if m == 0:
        raise NumericalFailure("barrier method needs at least one inequality")
    f0 = fz(z)[0]
    t = m / max(abs(f0), 1e-300)
    ok = True
    for _ in range(max_outer):
        z, ok = _center(fz, G, h, z, t)
        f = fz(z)[0]
        if m / t <= gap_tol * max(abs(f), 1e-300):
            break
        t *= mu
    else:
        ok = False
    s = h - G @ z
    res = _finish(fz, G, h, z, 1.0 / (t * s), convex=True)
    res.converged = ok
    return res


def slsqp_minimize(fz, G, h, z0, norm_cap: float | None = None, maxiter: int = 500,
                   convex: bool = False) -> LocalResult:
    """Sequential quadratic programming from ``z0`` (need not be interior)."""
    cons = []
    if G.shape[0]:
        cons.append({"type": "ineq", "fun": lambda z: h - G @ z, "jac": lambda z: -G})
    if norm_cap is not None:
        cons.append({"type": "ineq", "fun": lambda z: np.array([0.5 * (norm_cap**2 - z @ z)]),
                     "jac": lambda z: -z[None, :]})
    res = minimize(fz.value, z0, jac=lambda z: fz(z)[1], method="SLSQP",
                   constraints=cons, options={"maxiter": maxiter, "ftol": 1e-15})
    z = res.x
    if G.shape[0]:
        # pull back tiny violations left by SLSQP
        s = h - G @ z
        if np.min(s) < 0:
            viol = s < 0
            z = z - np.linalg.pinv(G[viol]) @ (-s[viol])
    out = _finish(fz, G, h, z, None, convex)
    out.converged = bool(res.success) or out.kkt <= 1e-6
    return out
