"""Regenerate ``src/drpo/data/instances.json``, the small oracle test instances.

Each instance stores raw scenarios (so loaders exercise the same moment
code as real data), the region parameters, a grid box that contains the
optimum, and radii at which both outer problems are bounded.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np


def exact_moment_scenarios(mean, cov, N, seed):
    """N scenarios whose empirical mean and population covariance are exactly ``mean``, ``cov``."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((N, len(mean)))
    Z -= Z.mean(axis=0)
    Z = Z @ np.linalg.inv(np.linalg.cholesky(Z.T @ Z / N)).T
    return np.asarray(mean) + Z @ np.linalg.cholesky(cov).T


def build():
    out = []
    out.append({
        "name": "n2_wedge",
        "note": "two assets, anisotropic covariance; both constraints active",
        "s0": [1.0, 1.1],
        "scenarios": [[1.2, 0.9], [0.8, 1.1], [1.0, 1.0], [1.1, 1.25], [0.9, 0.8]],
        "alpha_tilde": 0.01, "epsilon": 0.01,
        "grid_box": 5.0, "grid_step": 1e-3,
        "deltas_wc": [0.0, 0.001, 0.1, 0.5], "deltas_bc": [0.001, 0.005, 0.01],
    })
    rng = np.random.default_rng(7)
    s0 = np.array([1.0, 0.9, 1.2])
    scen = s0 * (1.08 + 0.2 * rng.standard_normal((10, 3)))
    out.append({
        "name": "n3_both_active",
        "note": "three assets from a noisy drift model; both constraints active",
        "s0": s0.tolist(), "scenarios": scen.tolist(),
        "alpha_tilde": 0.05, "epsilon": 0.02,
        "grid_box": 3.0, "grid_step": 0.02,
        "deltas_wc": [0.0, 0.1, 1.0], "deltas_bc": [0.005, 0.014],
    })
    C = 0.01 * np.array([[1.0, 0.999 * 1.05, 0.0], [0.999 * 1.05, 1.05**2, 0.0], [0.0, 0.0, 25.0]])
    scen = exact_moment_scenarios([1.0, 1.15, 1.05], C, 12, seed=1)
    out.append({
        "name": "n3_short_active",
        "note": "near-collinear pair with a high-drift volatile leg; only the short-cost "
                "constraint is active",
        "s0": [1.0, 1.0, 1.0], "scenarios": scen.tolist(),
        "alpha_tilde": 0.001, "epsilon": 0.01,
        "grid_box": 0.5, "grid_step": 0.005,
        "deltas_wc": [0.0, 0.1, 1.0], "deltas_bc": [3e-6, 8e-6],
    })
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("src/drpo/data/instances.json"))
    args = p.parse_args(argv)
    args.out.write_text(json.dumps(build(), indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
