"""Price ingestion, empirical scenario sets and their first two moments."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError, SingularCovariance

log = logging.getLogger(__name__)

SCENARIO_MODES = ("levels", "one-period-ahead")


@dataclass(frozen=True)
class PriceSeries:
    tickers: list[str]
    dates: list[dt.date]
    prices: np.ndarray  # T x n

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise DataError("prices must be a T x n matrix")
        T, n = prices.shape
        if n < 1 or T < 2:
            raise DataError(f"need n >= 1 assets and T >= 2 observations, got n={n}, T={T}")
        if len(self.tickers) != n or len(self.dates) != T:
            raise DataError("tickers/dates do not match the price matrix shape")
        if not np.all(np.isfinite(prices)):
            raise DataError("missing or non-finite price cells")
        if np.any(prices <= 0):
            i, j = np.argwhere(prices <= 0)[0]
            raise DataError(f"non-positive price {prices[i, j]!r} for {self.tickers[j]} on {self.dates[i]}")
        for a, b in zip(self.dates, self.dates[1:]):
            if not b > a:
                raise DataError(f"dates not strictly increasing at {a} -> {b}")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    @property
    def n(self) -> int:
        return self.prices.shape[1]

    @property
    def T(self) -> int:
        return self.prices.shape[0]


@dataclass(frozen=True)
class ScenarioSet:
    """Current prices ``s0`` and the N equally weighted time-1 scenarios."""

    s0: np.ndarray
    scenarios: np.ndarray  # N x n

    def __post_init__(self):
        s0 = np.atleast_1d(np.asarray(self.s0, dtype=float))
        sc = np.asarray(self.scenarios, dtype=float)
        if sc.ndim == 1:
            sc = sc[:, None]
        if sc.ndim != 2 or sc.shape[1] != s0.shape[0]:
            raise DataError("scenario matrix must be N x n with n = len(s0)")
        if sc.shape[0] < 2:
            raise DataError("need at least two scenarios")
        if not (np.all(np.isfinite(sc)) and np.all(np.isfinite(s0))):
            raise DataError("scenarios and s0 must be finite")
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "scenarios", sc)

    @property
    def n(self) -> int:
        return self.scenarios.shape[1]

    @property
    def N(self) -> int:
        return self.scenarios.shape[0]


@dataclass(frozen=True)
class Moments:
    mean: np.ndarray
    cov: np.ndarray
    min_eig: float = field(default=np.nan)

    def with_ridge(self, ridge: float) -> "Moments":
        """Return moments with ``ridge * I`` added to the covariance."""
        if ridge < 0:
            raise ValueError("ridge must be non-negative")
        if ridge:
            log.warning("adding ridge %g * I to the scenario covariance", ridge)
        cov = self.cov + ridge * np.eye(len(self.mean))
        return Moments(self.mean, cov, float(np.linalg.eigvalsh(cov)[0]))


def _parse_date(text: str, lineno: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        try:
            return dt.datetime.fromisoformat(text.strip()).date()
        except ValueError:
            raise ParseError(f"line {lineno}: bad ISO-8601 date {text!r}") from None


def load_prices(path, delimiter: str = ",") -> PriceSeries:
    """Read a ``date,TICKER1,TICKER2,...`` CSV file of closing prices."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise ParseError(f"{path}: header must start with 'date' followed by tickers")
    tickers = header[1:]
    if len(set(tickers)) != len(tickers):
        raise ParseError(f"{path}: duplicate tickers in header")
    dates, prices = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        dates.append(_parse_date(row[0], lineno))
        vals = []
        for cell in row[1:]:
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"line {lineno}: bad price cell {cell!r}") from None
        prices.append(vals)
    if not prices:
        raise DataError(f"{path}: no price rows")
    return PriceSeries(tickers, dates, np.array(prices, dtype=float))


def build_scenario_set(ps: PriceSeries, mode: str = "levels") -> ScenarioSet:
    """Turn a price history into an empirical scenario set.

    ``levels`` uses every observed row as a scenario for the time-1 prices and
    the most recent row as ``s0``.  ``one-period-ahead`` drops the oldest row,
    so the scenarios are the T-1 closes that each follow an earlier close.
    """
    if ps.T < 2:
        raise DataError("need at least two observations")
    if mode == "levels":
        scen = ps.prices
    elif mode == "one-period-ahead":
        scen = ps.prices[1:]
        if scen.shape[0] < 2:
            raise DataError("one-period-ahead mode needs T >= 3")
    else:
        raise ValueError(f"unknown scenario mode {mode!r}; expected one of {SCENARIO_MODES}")
    return ScenarioSet(ps.prices[-1].copy(), np.array(scen, dtype=float))


def empirical_moments(sc: ScenarioSet, eig_tol: float | None = None) -> Moments:
    """Mean and population (1/N) covariance under the empirical measure.

    Raises SingularCovariance when the smallest eigenvalue is below
    ``eig_tol`` (default ``1e-10 * trace / n``, with the trace floored at
    ``1e-12`` of the mean squared price so constant series are rejected).
    """
    x = sc.scenarios
    mean = x.mean(axis=0)
    dev = x - mean
    cov = dev.T @ dev / x.shape[0]
    cov = 0.5 * (cov + cov.T)
    min_eig = float(np.linalg.eigvalsh(cov)[0])
    if eig_tol is None:
        # a variance at rounding level of the prices is no variance at all
        scale = max(float(np.trace(cov)) / cov.shape[0], 1e-12 * float(np.mean(x**2)))
        eig_tol = 1e-10 * scale
    if min_eig <= eig_tol:
        raise SingularCovariance(f"covariance not positive definite (min eigenvalue {min_eig:.3e})")
    return Moments(mean, cov, min_eig)


def moments_unchecked(sc: ScenarioSet) -> Moments:
    """Moments without the definiteness check (for diagnostics only)."""
    x = sc.scenarios
    mean = x.mean(axis=0)
    dev = x - mean
    cov = dev.T @ dev / x.shape[0]
    return Moments(mean, 0.5 * (cov + cov.T), float(np.linalg.eigvalsh(cov)[0]))
