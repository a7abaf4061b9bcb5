"""Generate the bundled synthetic month-end price file.

Five correlated geometric Brownian motions sampled at calendar month ends
from 2015-07-31 to 2020-06-30 (60 closes).  The output is deterministic in
``--seed``.

    python3 scripts/make_synthetic_data.py --out src/drpo/data/synthetic_etf.csv
"""
from __future__ import annotations

import argparse
import calendar
import csv
import datetime as dt
from pathlib import Path

import numpy as np

TICKERS = ["SYN_TECH", "SYN_HLTH", "SYN_ENRG", "SYN_FIN", "SYN_UTIL"]
START_PRICE = np.array([45.0, 70.0, 60.0, 25.0, 48.0])
# annualised drift and volatility
MU = np.array([0.16, 0.09, -0.04, 0.05, 0.07])
VOL = np.array([0.20, 0.15, 0.28, 0.22, 0.13])
CORR = np.array([
    [1.00, 0.55, 0.40, 0.60, 0.25],
    [0.55, 1.00, 0.35, 0.50, 0.40],
    [0.40, 0.35, 1.00, 0.55, 0.20],
    [0.60, 0.50, 0.55, 1.00, 0.30],
    [0.25, 0.40, 0.20, 0.30, 1.00],
])


def month_ends(first: dt.date, count: int) -> list[dt.date]:
    out = []
    y, m = first.year, first.month
    for _ in range(count):
        out.append(dt.date(y, m, calendar.monthrange(y, m)[1]))
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def simulate(seed: int, T: int = 60) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dt_ = 1.0 / 12.0
    L = np.linalg.cholesky(CORR)
    z = rng.standard_normal((T - 1, len(TICKERS))) @ L.T
    steps = (MU - 0.5 * VOL**2) * dt_ + VOL * np.sqrt(dt_) * z
    logp = np.log(START_PRICE) + np.vstack([np.zeros(len(TICKERS)), np.cumsum(steps, axis=0)])
    return np.round(np.exp(logp), 2)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("src/drpo/data/synthetic_etf.csv"))
    p.add_argument("--seed", type=int, default=20200630)
    args = p.parse_args(argv)
    prices = simulate(args.seed)
    dates = month_ends(dt.date(2015, 7, 1), prices.shape[0])
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + TICKERS)
        for d, row in zip(dates, prices):
            w.writerow([d.isoformat()] + [f"{v:.2f}" for v in row])
    print(f"wrote {args.out} ({prices.shape[0]} rows x {prices.shape[1]} assets)")


if __name__ == "__main__":
    main()
