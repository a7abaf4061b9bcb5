"""Worst- and best-case portfolio variance over a squared-Wasserstein ball.

The ball is centred at the empirical measure of a ScenarioSet, uses the ground
cost ``||u - v||_2^2`` and has budget ``delta``.  With the portfolio mean
pinned at its empirical value the extremal variances have closed forms

    worst = (sigma + sqrt(delta) ||w||)^2
    best  = max(sigma - sqrt(delta) ||w||, 0)^2

where ``sigma^2 = w' Sigma w``.  The achiever functions build explicit
perturbed scenario sets that attain these values, and ``dual_objective_bc``
evaluates the Lagrangian dual of the best-case inner problem so the closed
form can be checked independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBase, DimensionMismatch, DomainError
from .market_data import Moments, ScenarioSet


@dataclass(frozen=True)
class Portfolio:
    w: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if w.ndim != 1:
            raise DimensionMismatch("portfolio weights must be a vector")
        object.__setattr__(self, "w", w)

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(self.w))

    def __len__(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class AmbiguityRadius:
    delta: float

    def __post_init__(self):
        d = float(self.delta)
        if not d >= 0 or not math.isfinite(d):
            raise DomainError(f"ambiguity radius must be finite and >= 0, got {self.delta!r}")
        object.__setattr__(self, "delta", d)


@dataclass(frozen=True)
class DualPoint:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not self.lambda1 >= 0:
            raise DomainError("lambda1 must be non-negative")


@dataclass(frozen=True)
class PerturbedScenarioSet:
    scenarios: np.ndarray
    cost: float

    def portfolio_variance(self, w) -> float:
        x = self.scenarios @ _weights(w)
        return float(np.mean((x - x.mean()) ** 2))

    def portfolio_mean(self, w) -> float:
        return float(np.mean(self.scenarios @ _weights(w)))


def _weights(w) -> np.ndarray:
    return w.w if isinstance(w, Portfolio) else np.atleast_1d(np.asarray(w, dtype=float))


def _delta(d) -> float:
    return d.delta if isinstance(d, AmbiguityRadius) else AmbiguityRadius(d).delta


def _scenarios(sc) -> np.ndarray:
    x = sc.scenarios if isinstance(sc, ScenarioSet) else np.asarray(sc, dtype=float)
    return np.atleast_2d(x)


def _check_dims(w: np.ndarray, n: int):
    if w.shape[0] != n:
        raise DimensionMismatch(f"portfolio has {w.shape[0]} weights, data has {n} assets")


def base_variance(w, m: Moments) -> float:
    """Portfolio variance ``w' Sigma w`` (clipped at zero against round-off)."""
    w = _weights(w)
    _check_dims(w, m.cov.shape[0])
    return max(float(w @ m.cov @ w), 0.0)


def _std_and_norm(w, m):
    w = _weights(w)
    return math.sqrt(base_variance(w, m)), float(np.linalg.norm(w))


def worst_case_variance(w, m: Moments, d) -> float:
    sigma, nw = _std_and_norm(w, m)
    return (sigma + math.sqrt(_delta(d)) * nw) ** 2


def best_case_variance(w, m: Moments, d) -> float:
    sigma, nw = _std_and_norm(w, m)
    return max(sigma - math.sqrt(_delta(d)) * nw, 0.0) ** 2


def dual_lambda2_star(lambda1: float, w, alpha: float, sc) -> float:
    """Minimiser of the best-case dual objective in ``lambda2`` for fixed ``lambda1``."""
    w = _weights(w)
    x = _scenarios(sc) @ w
    C = alpha - x.mean()
    return -2.0 * alpha - 2.0 * C * lambda1 / float(w @ w)


def dual_objective_bc(p: DualPoint, w, alpha: float, d, sc) -> float:
    """Best-case dual objective H(lambda1, lambda2).

    H = lambda1*delta + lambda2*alpha + mean_i Phi_i with

        Phi_i = -x_i^2 - lambda2 x_i + (2 x_i + lambda2)^2 ||w||^2 / (4 (||w||^2 + lambda1))

    and ``x_i = w . s_i``.  ``inf H`` equals ``-inf_Q E_Q[(w.S)^2]`` over the
    ball restricted to ``E_Q[w.S] = alpha``.
    """
    w = _weights(w)
    x = _scenarios(sc)
    _check_dims(w, x.shape[1])
    if not p.lambda1 >= 0:
        raise DomainError("lambda1 must be non-negative")
    W = float(w @ w)
    if W == 0:
        raise DomainError("dual objective needs a non-zero portfolio")
    xi = x @ w
    l1, l2 = p.lambda1, p.lambda2
    phi = -xi**2 - l2 * xi + (2 * xi + l2) ** 2 * W / (4 * (W + l1))
    return l1 * _delta(d) + l2 * alpha + float(phi.mean())


def _dual_profile_vec(l1, l2, xi, W, alpha, delta):
    # H evaluated on broadcast arrays of (lambda1, lambda2)
    l1 = np.asarray(l1)[..., None]
    l2 = np.asarray(l2)[..., None]
    phi = -xi**2 - l2 * xi + (2 * xi + l2) ** 2 * W / (4 * (W + l1))
    return l1[..., 0] * delta + l2[..., 0] * alpha + phi.mean(axis=-1)


def dual_grid_minimum(w, alpha: float, d, sc, lam1_max: float | None = None,
                      n_lam1: int = 401, n_lam2: int = 41, rounds: int = 60) -> tuple[float, DualPoint]:
    """Adaptive grid minimum of ``dual_objective_bc`` over ``lambda1 in [0, lam1_max]``.

    For every lambda1 node a lambda2 grid centred on the analytic stationary
    point is refined by repeated zooming; the lambda1 grid (zero plus a
    geometric sweep) is then zoomed around its best node.  The function is
    jointly convex, so zooming on the profile converges.
    """
    w = _weights(w)
    x = _scenarios(sc)
    _check_dims(w, x.shape[1])
    delta = _delta(d)
    xi = x @ w
    W = float(w @ w)
    if lam1_max is None:
        lam1_max = 1e8 * W

    def profile(l1s):
        l1s = np.asarray(l1s, dtype=float)
        C = alpha - xi.mean()
        centre = -2.0 * alpha - 2.0 * C * l1s / W
        half = 1.0 + np.abs(centre)
        best_val = np.full(l1s.shape, np.inf)
        best_l2 = centre.copy()
        for _ in range(rounds):
            grid = best_l2[:, None] + half[:, None] * np.linspace(-1.0, 1.0, n_lam2)[None, :]
            vals = _dual_profile_vec(np.broadcast_to(l1s[:, None], grid.shape), grid, xi, W, alpha, delta)
            k = np.argmin(vals, axis=1)
            rows = np.arange(len(l1s))
            improved = vals[rows, k] <= best_val
            best_val = np.where(improved, vals[rows, k], best_val)
            best_l2 = np.where(improved, grid[rows, k], best_l2)
            half = half * 4.0 / (n_lam2 - 1)
            if np.all(half <= 1e-16 * (1.0 + np.abs(best_l2))):
                break
        return best_val, best_l2

    l1s = np.concatenate([[0.0], np.geomspace(1e-12 * max(W, 1e-300), lam1_max, n_lam1 - 1)])
    best = (np.inf, 0.0, 0.0)
    for _ in range(rounds):
        vals, l2s = profile(l1s)
        k = int(np.argmin(vals))
        if vals[k] < best[0]:
            best = (float(vals[k]), float(l1s[k]), float(l2s[k]))
        lo = l1s[max(k - 1, 0)]
        hi = l1s[min(k + 1, len(l1s) - 1)]
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        l1s = np.linspace(lo, hi, 41)
    return best[0], DualPoint(best[1], best[2])


def _perturb_along(w: np.ndarray, x: np.ndarray, c: float) -> PerturbedScenarioSet:
    xi = x @ w
    dev = xi - xi.mean()
    W = float(w @ w)
    shift = c * dev[:, None] * w[None, :] / W
    cost = float(np.mean(np.sum(shift**2, axis=1)))
    return PerturbedScenarioSet(x + shift, cost)


def _achiever_inputs(w, sc, d):
    w = _weights(w)
    x = _scenarios(sc)
    _check_dims(w, x.shape[1])
    xi = x @ w
    sigma = float(np.sqrt(np.mean((xi - xi.mean()) ** 2)))
    if sigma == 0.0 or not np.any(w):
        raise DegenerateBase("portfolio value is constant across scenarios")
    return w, x, sigma, math.sqrt(_delta(d)) * float(np.linalg.norm(w))


def worst_case_achiever(w, sc, d) -> PerturbedScenarioSet:
    """Stretch scenario deviations along ``w`` to spend the whole budget.

    The portfolio mean is unchanged and the perturbed portfolio standard
    deviation becomes ``sigma + sqrt(delta) ||w||``.
    """
    w, x, sigma, pen = _achiever_inputs(w, sc, d)
    return _perturb_along(w, x, pen / sigma)


def best_case_achiever(w, sc, d) -> PerturbedScenarioSet:
    """Shrink scenario deviations along ``w``; collapses them once the budget suffices."""
    w, x, sigma, pen = _achiever_inputs(w, sc, d)
    c = min(1.0, pen / sigma)
    p = _perturb_along(w, x, -c)
    delta = _delta(d)
    for k in range(1, 5):
        if p.cost <= delta:
            break
        # rounding can put the cost an ulp over budget; the variance moves by ~1e-16
        c *= math.sqrt(delta / p.cost) * (1.0 - 4e-16 * k)
        p = _perturb_along(w, x, -c)
    return p


def random_feasible_perturbation(sc, d, seed: int) -> PerturbedScenarioSet:
    """Random scenario shifts with mean squared transport cost at most ``delta``."""
    x = _scenarios(sc)
    delta = _delta(d)
    rng = np.random.default_rng(seed)
    if delta == 0.0:
        return PerturbedScenarioSet(x.copy(), 0.0)
    shift = rng.standard_normal(x.shape)
    # mix in heavy-tailed per-scenario weights so some draws concentrate the budget
    shift *= rng.exponential(size=(x.shape[0], 1)) ** 2
    budget = delta * (1.0 if rng.random() < 0.25 else rng.random())
    raw = float(np.mean(np.sum(shift**2, axis=1)))
    if raw == 0.0:
        return PerturbedScenarioSet(x.copy(), 0.0)
    shift *= math.sqrt(budget / raw) * (1.0 - 1e-12)
    return PerturbedScenarioSet(x + shift, float(np.mean(np.sum(shift**2, axis=1))))
