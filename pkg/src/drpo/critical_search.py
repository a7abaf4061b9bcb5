"""Robustness degrees, critical ambiguity radii and radius trajectories.

A portfolio with mean return ``alpha`` and (robust) variance ``v`` survives
``theta`` standard deviations when ``v <= g_alpha(theta) = alpha^2/theta^2``.
The robustness degree of the optimal portfolio is therefore
``theta* = alpha* / sqrt(v)``, infinite when ``v = 0 < alpha*`` (a
classical arbitrage inside the ambiguity ball).

The worst-case value is non-decreasing in the radius and the best-case one
non-increasing, so the radius at which either crosses a target level is
found by bisection.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .errors import BracketFailure, DomainError, DRPOError, InfeasibleRegion
from .market_data import Moments
from .outer_solver import DEFAULT_STARTS, FeasibleRegion, SolverResult, solve_bc_multistart, solve_wc
from .outer_solver.reduced import solve_bc_sdp_path
from .robust_variance import Portfolio

log = logging.getLogger(__name__)

MODES = ("wc", "bc")
DEFAULT_TOL = 1e-6
DOUBLING_CAP = 1e12


def g_alpha(alpha: float, theta: float) -> float:
    """Variance budget ``alpha^2 / theta^2``; ``theta = inf`` gives 0."""
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if math.isinf(theta):
        return 0.0
    return alpha * alpha / (theta * theta)


@dataclass(frozen=True)
class ThetaStar:
    """Extended-real robustness degree, tagged rather than encoded as a float."""

    kind: str  # "finite", "infinite" or "undefined"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("finite", "infinite", "undefined"):
            raise ValueError(f"bad ThetaStar kind {self.kind!r}")
        if (self.kind == "finite") != (self.value is not None):
            raise ValueError("only finite degrees carry a value")

    @classmethod
    def finite(cls, x: float) -> "ThetaStar":
        return cls("finite", float(x))

    @property
    def is_infinite(self) -> bool:
        return self.kind == "infinite"

    @property
    def is_defined(self) -> bool:
        return self.kind != "undefined"

    def as_float(self) -> float:
        """Float view for plotting; infinite maps to ``inf`` and undefined to ``nan``."""
        return {"finite": self.value, "infinite": math.inf}.get(self.kind, math.nan)

    def __le__(self, other: "ThetaStar") -> bool:
        if not (self.is_defined and other.is_defined):
            raise DomainError("undefined robustness degrees are not ordered")
        if other.is_infinite:
            return True
        return not self.is_infinite and self.value <= other.value

    def __ge__(self, other: "ThetaStar") -> bool:
        return other <= self

    def __str__(self):
        return {"finite": repr(self.value), "infinite": "INF"}.get(self.kind, "UNDEFINED")


INFINITE = ThetaStar("infinite")
UNDEFINED = ThetaStar("undefined")


def theta_star(alpha_star: float, value: float) -> ThetaStar:
    """Invert ``v = g_alpha(theta)`` for theta."""
    if alpha_star < 0:
        raise DomainError(f"alpha_star must be >= 0, got {alpha_star!r}")
    if value < 0:
        raise DomainError(f"value must be >= 0, got {value!r}")
    if value > 0:
        return ThetaStar.finite(alpha_star / math.sqrt(value))
    return INFINITE if alpha_star > 0 else UNDEFINED


@dataclass
class RobustnessResult:
    delta: float
    value: float
    alpha_star: float
    theta_star: ThetaStar
    arbitrage: bool
    w_star: Portfolio | None
    status: str = "optimal"
    restarts_used: int = 0
    objective: float = math.nan
    message: str = ""
    flags: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "unbounded", "max_iter")

    @classmethod
    def from_values(cls, delta: float, value: float, alpha_star: float, **kw) -> "RobustnessResult":
        th = theta_star(alpha_star, value)
        return cls(float(delta), float(value), float(alpha_star), th, th.is_infinite,
                   kw.pop("w_star", None), **kw)

    @classmethod
    def from_solver(cls, delta: float, res: SolverResult) -> "RobustnessResult":
        if res.status == "infeasible" or res.w_star is None:
            return cls.failed(delta, "infeasible", "no admissible portfolio")
        return cls.from_values(delta, res.value, max(res.alpha_star, 0.0), w_star=res.w_star,
                               status=res.status, restarts_used=res.restarts_used,
                               objective=res.objective, flags=tuple(res.flags))

    @classmethod
    def failed(cls, delta: float, status: str, message: str) -> "RobustnessResult":
        return cls(float(delta), math.nan, math.nan, UNDEFINED, False, None, status, 0, math.nan,
                   message)


@dataclass(frozen=True)
class ProblemInputs:
    """Everything a radius evaluation needs: moments, region and solver settings."""

    moments: Moments
    region: FeasibleRegion
    n_starts: int = DEFAULT_STARTS
    seed: int = 0
    bc_method: str = "multistart"  # or "path"

    def solve(self, delta: float, mode: str, warm_starts=()) -> SolverResult:
        if mode == "wc":
            return solve_wc(self.moments, delta, self.region)
        if mode != "bc":
            raise ValueError(f"mode must be 'wc' or 'bc', got {mode!r}")
        if self.bc_method == "path":
            return solve_bc_sdp_path(self.moments, delta, self.region, self.n_starts, self.seed)
        return solve_bc_multistart(self.moments, delta, self.region, n_starts=self.n_starts,
                                   seed=self.seed, warm_starts=warm_starts)

    def evaluate(self, delta: float, mode: str, warm_starts=()) -> RobustnessResult:
        return RobustnessResult.from_solver(delta, self.solve(delta, mode, warm_starts))


@dataclass(frozen=True)
class CriticalRadius:
    theta_target: float
    delta_critical: float
    bracket: tuple[float, float]
    iterations: int
    mode: str = "wc"
    evaluations: int = 0
    initial_bracket: tuple[float, float] = field(default=(0.0, 0.0))


def _as_evaluator(problem, mode) -> Callable[[float], RobustnessResult]:
    if isinstance(problem, ProblemInputs):
        state = {"w": ()}

        def ev(delta):
            r = problem.evaluate(delta, mode, state["w"])
            if r.status == "infeasible":
                raise InfeasibleRegion(r.message)
            if r.w_star is not None:
                state["w"] = (r.w_star,)
            return r

        return ev

    def ev(delta):
        r = problem(delta)
        if isinstance(r, RobustnessResult):
            return r
        value, alpha = r
        return RobustnessResult.from_values(delta, value, alpha)

    return ev


def bisect_threshold(crossed: Callable[[float], bool], tol: float = DEFAULT_TOL, lo: float = 0.0,
                     hi: float | None = None, cap: float = DOUBLING_CAP):
    """Smallest ``x >= lo`` with ``crossed(x)`` for a monotone predicate.

    Returns ``(lo, hi, iterations, evaluations, initial_bracket)`` where
    ``hi`` is the reported crossing and ``hi - lo <= tol``.  When ``hi`` is
    not given it is found by doubling from 1.  ``iterations`` counts
    bisection steps only and never exceeds ``ceil(log2((hi0 - lo0)/tol))``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    evals = 1
    if crossed(lo):
        return lo, lo, 0, evals, (lo, lo)
    if hi is None:
        hi = max(1.0, 2 * lo)
        evals += 1
        while not crossed(hi):
            lo, hi = hi, 2 * hi
            evals += 1
            if hi > cap:
                raise BracketFailure(f"no crossing found below {cap:g}")
    else:
        evals += 1
        if not crossed(hi):
            raise BracketFailure(f"no crossing at the upper bracket {hi!r}")
    bracket0 = (lo, hi)
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        evals += 1
        it += 1
        if crossed(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi, it, evals, bracket0


def critical_radius(theta: float, problem, mode: str, tol: float = DEFAULT_TOL,
                    hi: float | None = None, cap: float = DOUBLING_CAP) -> CriticalRadius:
    """Smallest radius at which the optimal robust variance crosses ``g_{alpha*}(theta)``.

    ``problem`` is a :class:`ProblemInputs` or any callable mapping a radius
    to a RobustnessResult or a ``(value, alpha_star)`` pair.  In worst-case
    mode the crossing is ``v >= g``, in best-case mode ``v <= g``;
    ``theta = inf`` in best-case mode locates the arbitrage onset.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be 'wc' or 'bc', got {mode!r}")
    g_alpha(1.0, theta)  # validates theta
    ev = _as_evaluator(problem, mode)

    def crossed(delta):
        r = ev(delta)
        if not r.ok:
            raise DRPOError(f"solver failed at delta={delta!r}: {r.status} {r.message}")
        g = g_alpha(r.alpha_star, theta)
        log.debug("delta=%r value=%r target=%r", delta, r.value, g)
        return r.value >= g if mode == "wc" else r.value <= g

    lo, hi, it, evals, b0 = bisect_threshold(crossed, tol=tol, hi=hi, cap=cap)
    return CriticalRadius(float(theta), hi, (lo, hi), it, mode, evals, b0)


def critical_radius_wc(theta: float, problem, tol: float = DEFAULT_TOL, **kw) -> CriticalRadius:
    return critical_radius(theta, problem, "wc", tol, **kw)


def critical_radius_bc(theta: float, problem, tol: float = DEFAULT_TOL, **kw) -> CriticalRadius:
    return critical_radius(theta, problem, "bc", tol, **kw)


def _check_deltas(deltas):
    ds = [float(d) for d in deltas]
    if any(not (d >= 0 and math.isfinite(d)) for d in ds):
        raise DomainError("radii must be finite and non-negative")
    if any(b < a for a, b in zip(ds, ds[1:])):
        raise DomainError("radii must be sorted in increasing order")
    return ds


def _evaluate_point(args):
    problem, delta, mode = args
    try:
        return problem.evaluate(delta, mode)
    except DRPOError as exc:
        return RobustnessResult.failed(delta, "error", str(exc))


def trajectory(deltas, mode: str, problem: ProblemInputs, parallel: bool = False,
               workers: int | None = None) -> list[RobustnessResult]:
    """One RobustnessResult per radius, in the order given.

    Sequential runs warm-start each solve from the previous optimum.  With
    ``parallel`` the points are solved independently in worker processes;
    output order is unchanged.  A failing point yields a result with status
    ``infeasible`` or ``error`` and does not stop the sweep.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be 'wc' or 'bc', got {mode!r}")
    ds = _check_deltas(deltas)
    if parallel and len(ds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_point, [(problem, d, mode) for d in ds]))
    out = []
    warm = ()
    for d in ds:
        try:
            r = problem.evaluate(d, mode, warm)
        except DRPOError as exc:
            log.error("delta=%r failed: %s", d, exc)
            r = RobustnessResult.failed(d, "error", str(exc))
        if r.w_star is not None:
            warm = (r.w_star,)
        out.append(r)
    return out


def is_monotone(results, direction: str) -> bool:
    """Check a trajectory's theta* is non-increasing (``"down"``) or non-decreasing (``"up"``)."""
    th = [r.theta_star for r in results if r.ok]
    if direction == "down":
        return all(b <= a for a, b in zip(th, th[1:]))
    if direction == "up":
        return all(a <= b for a, b in zip(th, th[1:]))
    raise ValueError("direction must be 'up' or 'down'")


__all__ = ["CriticalRadius", "INFINITE", "ProblemInputs", "RobustnessResult", "ThetaStar",
           "UNDEFINED", "bisect_threshold", "critical_radius", "critical_radius_bc",
           "critical_radius_wc", "g_alpha", "is_monotone", "theta_star", "trajectory"]
