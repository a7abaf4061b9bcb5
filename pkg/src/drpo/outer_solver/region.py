"""Feasible portfolio regions and their linear-algebra reductions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from ..errors import DomainError, InfeasibleRegion, RestrictionError
from ..market_data import Moments, ScenarioSet
from ..restrictions import (Constraint, RestrictionSet, convex_constraints, enumerate_nonconvex,
                            satisfies, validate)
from ..robust_variance import Portfolio

FEAS_TOL = 1e-8


def default_epsilon(s0) -> float:
    return 1e-6 * float(np.linalg.norm(s0))


@dataclass(frozen=True)
class FeasibleRegion:
    """Strong admissibility: ``w.s0 <= -epsilon`` and ``mean.w >= alpha_tilde``, plus restrictions."""

    s0: np.ndarray
    scen_mean: np.ndarray
    alpha_tilde: float
    epsilon: float
    restrictions: RestrictionSet = field(default_factory=RestrictionSet)

    def __post_init__(self):
        s0 = np.atleast_1d(np.asarray(self.s0, dtype=float))
        mean = np.atleast_1d(np.asarray(self.scen_mean, dtype=float))
        if s0.shape != mean.shape:
            raise DomainError("s0 and scen_mean must have the same length")
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise DomainError("epsilon must be a positive finite number")
        if not math.isfinite(self.alpha_tilde):
            raise DomainError("alpha_tilde must be finite")
        problems = validate(self.restrictions, s0.shape[0])
        if problems:
            raise RestrictionError(problems)
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "scen_mean", mean)
        object.__setattr__(self, "alpha_tilde", float(self.alpha_tilde))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @classmethod
    def from_data(cls, sc: ScenarioSet, m: Moments, alpha0: float, epsilon: float | None = None,
                  restrictions: RestrictionSet | None = None) -> "FeasibleRegion":
        eps = default_epsilon(sc.s0) if epsilon is None else epsilon
        return cls(sc.s0, m.mean, alpha0, eps, restrictions or RestrictionSet())

    @property
    def n(self) -> int:
        return self.s0.shape[0]

    @property
    def card_threshold(self) -> float:
        t = self.restrictions.card_threshold
        return self.epsilon if t is None else t

    def base_constraints(self) -> list[Constraint]:
        return [Constraint(self.s0.copy(), -self.epsilon), Constraint(-self.scen_mean, -self.alpha_tilde)]

    def linear_regions(self) -> list["LinearRegion"]:
        """Convex pieces whose union is the region (one piece without non-convex restrictions)."""
        base = self.base_constraints() + convex_constraints(self.restrictions, self.n)
        return [LinearRegion.build(self.n, base + list(sub.constraints), sub.support)
                for sub in enumerate_nonconvex(self.restrictions, self.n, threshold=self.card_threshold)]

    def is_feasible(self, w, tol: float = FEAS_TOL) -> bool:
        w = np.asarray(w.w if isinstance(w, Portfolio) else w, dtype=float)
        if w @ self.s0 > -self.epsilon + tol or self.scen_mean @ w < self.alpha_tilde - tol:
            return False
        return satisfies(self.restrictions, w, self.card_threshold, tol)

    def scaled(self, c: float) -> "FeasibleRegion":
        """Region with epsilon and alpha_tilde multiplied by ``c`` (restrictions untouched)."""
        return FeasibleRegion(self.s0, self.scen_mean, c * self.alpha_tilde, c * self.epsilon,
                              self.restrictions)


@dataclass(frozen=True)
class LinearRegion:
    """Polyhedron ``G w <= h, E w = e`` with weights outside ``support`` fixed at zero."""

    G: np.ndarray
    h: np.ndarray
    E: np.ndarray
    e: np.ndarray
    support: tuple[int, ...]

    @classmethod
    def build(cls, n: int, constraints, support=None) -> "LinearRegion":
        le = [c for c in constraints if c.kind == "le"]
        eq = [c for c in constraints if c.kind == "eq"]
        G = np.array([c.coef for c in le], dtype=float).reshape(len(le), n)
        h = np.array([c.bound for c in le], dtype=float)
        E = np.array([c.coef for c in eq], dtype=float).reshape(len(eq), n)
        e = np.array([c.bound for c in eq], dtype=float)
        return cls(G, h, E, e, tuple(range(n)) if support is None else tuple(support))

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def scale_closed(self) -> bool:
        """True when ``w`` feasible implies ``c w`` feasible for every ``c >= 1``."""
        return bool(np.all(self.h <= 0) and np.all(self.e == 0))

    def reduce(self) -> "ReducedRegion":
        """Parameterise the region as ``w = x0 + N z`` with ``Gz z <= hz`` (unit rows)."""
        n = self.n
        sup = list(self.support)
        P = np.eye(n)[:, sup]
        scale = 1.0 + float(np.max(np.abs(np.concatenate([self.h, self.e, [0.0]]))))
        if self.E.shape[0]:
            Es = self.E[:, sup]
            xp, *_ = np.linalg.lstsq(Es, self.e, rcond=None)
            if np.linalg.norm(Es @ xp - self.e) > 1e-10 * scale:
                raise InfeasibleRegion("equality restrictions are inconsistent")
            Ns = null_space(Es)
        else:
            xp = np.zeros(len(sup))
            Ns = np.eye(len(sup))
        x0 = P @ xp
        N = P @ Ns
        Gz = self.G @ N
        hz = self.h - self.G @ x0
        norms = np.linalg.norm(Gz, axis=1)
        gnorm = np.maximum(np.linalg.norm(self.G, axis=1), 1e-300)
        keep = norms > 1e-13 * gnorm
        if np.any(hz[~keep] < -1e-12 * scale):
            raise InfeasibleRegion("a constraint is violated on the whole support")
        Gz, hz, norms = Gz[keep], hz[keep], norms[keep]
        return ReducedRegion(x0, N, Gz / norms[:, None], hz / norms, self)


@dataclass(frozen=True)
class ReducedRegion:
    x0: np.ndarray
    N: np.ndarray
    G: np.ndarray
    h: np.ndarray
    parent: LinearRegion

    @property
    def k(self) -> int:
        return self.N.shape[1]

    def to_w(self, z) -> np.ndarray:
        return self.x0 + self.N @ z

    def to_z(self, w) -> np.ndarray:
        return self.N.T @ (np.asarray(w, dtype=float) - self.x0)

    def slack(self, z) -> np.ndarray:
        return self.h - self.G @ z


@dataclass
class SolverResult:
    w_star: Portfolio | None
    objective: float
    value: float
    status: str
    kkt_residual: float
    restarts_used: int
    alpha_star: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def arbitrage(self) -> bool:
        """Zero robust variance with positive mean return at the optimum."""
        return self.status in ("optimal", "unbounded") and self.value == 0.0 and self.alpha_star > 0

    @classmethod
    def infeasible(cls, restarts_used: int = 0) -> "SolverResult":
        return cls(None, math.nan, math.nan, "infeasible", math.inf, restarts_used)
