"""Command-line front end.

    drpo trajectory --deltas 0,1,10,100 --mode both --out traj.csv
    drpo critical --theta 2 --mode wc
    drpo verify

Exit codes: 0 success, 1 configuration or input error, 2 partial trajectory
(some radii failed), 3 critical-radius bracket failure, 4 verification
failure.  Set ``DRPO_LOG`` (e.g. ``INFO`` or ``DEBUG``) for diagnostics on
standard error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import oracles
from .critical_search import (INFINITE, UNDEFINED, ProblemInputs, ThetaStar, critical_radius,
                              trajectory)
from .errors import BracketFailure, DRPOError, SingularCovariance
from .instances import SYNTHETIC_PRICES, data_path
from .market_data import (SCENARIO_MODES, Moments, build_scenario_set, empirical_moments,
                          load_prices, moments_unchecked)
from .outer_solver import DEFAULT_STARTS, FeasibleRegion, solve_wc
from .restrictions import RestrictionSet
from .robust_variance import (best_case_achiever, best_case_variance, dual_grid_minimum,
                              random_feasible_perturbation, worst_case_achiever,
                              worst_case_variance)

log = logging.getLogger("drpo")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL, EXIT_BRACKET, EXIT_VERIFY = 0, 1, 2, 3, 4
INF_TOKEN = "INF"
FAULTS = ("asymmetric-cov",)


class ConfigError(DRPOError):
    pass


@dataclass
class RunConfig:
    command: str = "trajectory"
    data: str | None = None  # None selects the bundled synthetic prices
    mode: str = "both"
    deltas: list[float] | None = None
    theta: float | None = None
    alpha0: float = 1.0
    epsilon: float | None = None
    restrictions: dict | None = None
    seed: int = 0
    n_starts: int = DEFAULT_STARTS
    format: str = "csv"
    out: str | None = None
    parallel: bool = False
    ridge: float = 0.0
    scenario_mode: str = "levels"
    tol: float = 1e-6
    bc_method: str = "multistart"
    inject_fault: str | None = None

    def validate(self):
        if self.command not in ("trajectory", "critical", "verify"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.mode not in ("wc", "bc", "both"):
            raise ConfigError(f"mode must be wc, bc or both, got {self.mode!r}")
        if self.command == "trajectory":
            if self.theta is not None:
                raise ConfigError("trajectory takes --deltas, not --theta")
            if not self.deltas:
                raise ConfigError("trajectory needs a non-empty --deltas list")
        if self.command == "critical":
            if self.deltas is not None:
                raise ConfigError("critical takes --theta, not --deltas")
            if self.theta is None:
                raise ConfigError("critical needs --theta")
            if not self.theta > 0:
                raise ConfigError(f"theta must be positive, got {self.theta!r}")
        if self.deltas is not None:
            if any(not (math.isfinite(d) and d >= 0) for d in self.deltas):
                raise ConfigError("radii must be finite and non-negative")
            self.deltas = sorted(self.deltas)
        if not math.isfinite(self.alpha0):
            raise ConfigError("alpha0 must be finite")
        if self.epsilon is not None and not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError("epsilon must be a positive finite number")
        if self.n_starts < 1:
            raise ConfigError("--starts must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not (self.ridge >= 0 and math.isfinite(self.ridge)):
            raise ConfigError("ridge must be >= 0")
        if self.scenario_mode not in SCENARIO_MODES:
            raise ConfigError(f"scenario mode must be one of {SCENARIO_MODES}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.bc_method not in ("multistart", "path"):
            raise ConfigError("bc method must be multistart or path")
        if self.inject_fault is not None and self.inject_fault not in FAULTS:
            raise ConfigError(f"unknown fault {self.inject_fault!r}")
        return self


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _restrictions_arg(text: str) -> dict:
    p = Path(text)
    raw = p.read_text() if p.is_file() else text
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"restrictions are not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise argparse.ArgumentTypeError("restrictions must be a JSON object")
    return d


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config; explicit flags override it")
    common.add_argument("--data", help="price CSV (date,TICKER,...); default: bundled synthetic data")
    common.add_argument("--mode", choices=("wc", "bc", "both"))
    common.add_argument("--alpha0", type=float, help="minimum empirical mean portfolio value (default 1.0)")
    common.add_argument("--epsilon", type=float, help="short-cost margin (default 1e-6 * |s0|)")
    common.add_argument("--restrictions", type=_restrictions_arg, help="JSON object or path to one")
    common.add_argument("--seed", type=int)
    common.add_argument("--starts", type=int, dest="n_starts", help="multistart starting points")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--parallel", action="store_true", default=None,
                        help="solve trajectory points in worker processes")
    common.add_argument("--ridge", type=float, help="add ridge * I to the covariance (logged)")
    common.add_argument("--scenario-mode", choices=SCENARIO_MODES, dest="scenario_mode")
    common.add_argument("--bc-method", choices=("multistart", "path"), dest="bc_method")
    common.add_argument("--inject-fault", choices=FAULTS, dest="inject_fault", help=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="drpo", description="Distributionally robust profit opportunities.")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("trajectory", parents=[common], help="robustness degree over a list of radii")
    t.add_argument("--deltas", type=_float_list, help="comma-separated radii")
    c = sub.add_parser("critical", parents=[common], help="critical radius for a target degree")
    c.add_argument("--theta", type=float, help="target robustness degree (inf allowed for bc)")
    c.add_argument("--tol", type=float)
    v = sub.add_parser("verify", parents=[common], help="run the oracle property suites")
    v.add_argument("--deltas", type=_float_list, help="radii to check (default 0.1,1,10)")
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    base = {}
    if ns.config is not None:
        try:
            base = json.loads(ns.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(base) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**base)
    cfg.command = ns.command
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None and f.name != "command":
            setattr(cfg, f.name, v)
    if cfg.command == "verify" and cfg.deltas is None:
        cfg.deltas = [0.1, 1.0, 10.0]
    return cfg.validate()


@dataclass
class Problem:
    tickers: list[str]
    s0: np.ndarray
    scenarios: object
    moments: Moments
    region: FeasibleRegion
    inputs: ProblemInputs


def load_problem(cfg: RunConfig) -> Problem:
    path = Path(cfg.data) if cfg.data is not None else data_path(SYNTHETIC_PRICES)
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    ps = load_prices(path)
    sc = build_scenario_set(ps, cfg.scenario_mode)
    try:
        m = empirical_moments(sc)
    except SingularCovariance as exc:
        if not cfg.ridge:
            raise SingularCovariance(f"{exc}; rerun with --ridge to regularise explicitly") from None
        m = moments_unchecked(sc)
    if cfg.ridge:
        m = m.with_ridge(cfg.ridge)
    if cfg.inject_fault == "asymmetric-cov":
        cov = m.cov.copy()
        cov[0, -1] += 1e-3 * max(abs(cov[0, -1]), 1.0)
        m = Moments(m.mean, cov, m.min_eig)
    rs = RestrictionSet.from_dict(cfg.restrictions)
    fr = FeasibleRegion.from_data(sc, m, cfg.alpha0, cfg.epsilon, rs)
    inputs = ProblemInputs(m, fr, cfg.n_starts, cfg.seed, cfg.bc_method)
    return Problem(list(ps.tickers), sc.s0, sc, m, fr, inputs)


def _modes(cfg):
    return ("wc", "bc") if cfg.mode == "both" else (cfg.mode,)


def _num(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _theta_cell(t: ThetaStar) -> str:
    return INF_TOKEN if t.is_infinite else ("" if not t.is_defined else repr(t.value))


TRAJECTORY_COLUMNS = ["mode", "delta", "value", "alpha_star", "theta_star", "arbitrage", "status",
                      "restarts_used"]


def trajectory_rows(mode: str, results, tickers):
    rows = []
    for r in results:
        row = {"mode": mode, "delta": r.delta, "value": r.value, "alpha_star": r.alpha_star,
               "theta_star": r.theta_star, "arbitrage": r.arbitrage, "status": r.status,
               "restarts_used": r.restarts_used}
        w = r.w_star.w if r.w_star is not None else [math.nan] * len(tickers)
        for t, x in zip(tickers, w):
            row[f"w_{t}"] = float(x)
        rows.append(row)
    return rows


def _csv_cell(v):
    if isinstance(v, ThetaStar):
        return _theta_cell(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _num(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, ThetaStar):
        return v.value if v.kind == "finite" else None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(rows, columns, fmt: str, meta: dict | None = None) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_cell(row[c]) for c in columns])
        return buf.getvalue()
    doc = dict(meta or {})
    doc["rows"] = [{c: _json_cell(row[c]) for c in columns} for row in rows]
    return json.dumps(doc, indent=2) + "\n"


def parse_table(text: str, fmt: str) -> list[dict]:
    """Read a rendered table back into typed rows (inverse of :func:`render`)."""
    if fmt == "json":
        rows = json.loads(text)["rows"]
        out = []
        for row in rows:
            row = dict(row)
            if "theta_star" in row:
                th = row["theta_star"]
                if th is not None:
                    row["theta_star"] = ThetaStar.finite(th)
                else:
                    row["theta_star"] = INFINITE if row.get("arbitrage") else UNDEFINED
            out.append({k: (math.nan if v is None and k != "theta_star" else v) for k, v in row.items()})
        return out
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        typed = {}
        for k, v in row.items():
            if k == "theta_star":
                typed[k] = INFINITE if v == INF_TOKEN else (UNDEFINED if v == "" else ThetaStar.finite(float(v)))
            elif k in ("mode", "status"):
                typed[k] = v
            elif k == "arbitrage":
                typed[k] = v == "true"
            elif k in ("restarts_used", "iterations"):
                typed[k] = int(v)
            else:
                typed[k] = math.nan if v == "" else float(v)
        out.append(typed)
    return out


def _emit(text: str, cfg: RunConfig):
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, out)


def run_trajectory(cfg: RunConfig) -> int:
    prob = load_problem(cfg)
    rows = []
    failed = 0
    for mode in _modes(cfg):
        res = trajectory(cfg.deltas, mode, prob.inputs, parallel=cfg.parallel)
        failed += sum(not r.ok for r in res)
        rows += trajectory_rows(mode, res, prob.tickers)
    columns = TRAJECTORY_COLUMNS + [f"w_{t}" for t in prob.tickers]
    _emit(render(rows, columns, cfg.format, {"command": "trajectory"}), cfg)
    if failed:
        log.error("%d of %d trajectory points failed", failed, len(rows))
        return EXIT_PARTIAL
    return EXIT_OK


CRITICAL_COLUMNS = ["mode", "theta_target", "delta_critical", "bracket_lo", "bracket_hi", "iterations"]


def run_critical_radius(cfg: RunConfig) -> int:
    prob = load_problem(cfg)
    rows = []
    for mode in _modes(cfg):
        cr = critical_radius(cfg.theta, prob.inputs, mode, tol=cfg.tol)
        rows.append({"mode": mode, "theta_target": cr.theta_target, "delta_critical": cr.delta_critical,
                     "bracket_lo": cr.bracket[0], "bracket_hi": cr.bracket[1],
                     "iterations": cr.iterations})
    _emit(render(rows, CRITICAL_COLUMNS, cfg.format, {"command": "critical"}), cfg)
    return EXIT_OK


def _check(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def verification_checks(prob: Problem, deltas, seed: int = 0) -> list[dict]:
    """Oracle property suites on one dataset; each entry says whether it passed."""
    m, sc, fr = prob.moments, prob.scenarios, prob.region
    cov = m.cov
    checks = []
    asym = float(np.max(np.abs(cov - cov.T))) / max(float(np.max(np.abs(cov))), 1e-300)
    pd_ok = bool(np.all(np.linalg.eigvalsh(0.5 * (cov + cov.T)) > 0))
    checks.append(_check("covariance_symmetric_pd", asym <= 1e-12 and pd_ok,
                         {"asymmetry": asym, "positive_definite": pd_ok}))
    rng = np.random.default_rng(seed)
    portfolios = [solve_wc(m, d, fr).w_star.w for d in deltas]
    portfolios += [rng.standard_normal(sc.n) for _ in range(2)]

    worst = 0.0
    cost_ok = True
    for w in portfolios:
        for d in deltas:
            for ach, closed in ((worst_case_achiever(w, sc, d), worst_case_variance(w, m, d)),
                                (best_case_achiever(w, sc, d), best_case_variance(w, m, d))):
                err = abs(ach.portfolio_variance(w) - closed) / max(closed, 1e-300)
                worst = max(worst, err if closed > 0 else abs(ach.portfolio_variance(w)))
                cost_ok &= ach.cost <= d * (1 + 1e-12) + 1e-15
    checks.append(_check("achiever_tightness", worst <= 1e-9 and cost_ok,
                         {"max_rel_error": worst, "cost_within_budget": bool(cost_ok)}))

    bad = 0
    k = 0
    for i, w in enumerate(portfolios):
        for d in deltas:
            lo, hi = best_case_variance(w, m, d), worst_case_variance(w, m, d)
            for j in range(100):
                pert = random_feasible_perturbation(sc, d, seed=seed * 1_000_000 + i * 1000 + j)
                v = pert.portfolio_variance(w)
                k += 1
                slack = 1e-9 * max(1.0, hi)
                bad += not (lo - slack <= v <= hi + slack)
    checks.append(_check("sandwich", bad == 0, {"samples": k, "violations": bad}))

    worst = 0.0
    for w in portfolios[:2]:
        alpha = float(m.mean @ w)
        for d in deltas:
            hmin, _ = dual_grid_minimum(w, alpha, d, sc)
            bcv = best_case_variance(w, m, d)
            dual = -hmin - alpha * alpha
            worst = max(worst, abs(dual - bcv) / max(bcv, 1e-12 * max(1.0, abs(alpha) ** 2)))
    checks.append(_check("dual_cross_check", worst <= 1e-3, {"max_rel_error": worst}))

    G, h = oracles.region_rows(fr.s0, fr.scen_mean, fr.alpha_tilde, fr.epsilon)
    qp = oracles.qp_projected_gradient(cov, G, h)
    sv = solve_wc(m, 0.0, fr).value
    rel = abs(qp.value - sv) / max(sv, 1e-300)
    checks.append(_check("delta0_qp_agreement", rel <= 1e-6 if fr.restrictions.is_empty(fr.n) else True,
                         {"solver": sv, "oracle": qp.value, "rel_error": rel,
                          "skipped": not fr.restrictions.is_empty(fr.n)}))
    return checks


def run_verify(cfg: RunConfig) -> int:
    prob = load_problem(cfg)
    checks = verification_checks(prob, cfg.deltas, cfg.seed)
    failing = [c["name"] for c in checks if not c["passed"]]
    report = {"command": "verify", "passed": not failing, "failing": failing, "checks": checks}
    _emit(json.dumps(report, indent=2, default=float) + "\n", cfg)
    if failing:
        print("verification failed: " + ", ".join(failing), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _setup_logging():
    level = os.environ.get("DRPO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    try:
        cfg = config_from_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_FATAL if exc.code else EXIT_OK
    except DRPOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    log.info("config: %s", json.dumps(asdict(cfg), default=str, sort_keys=True))
    try:
        if cfg.command == "trajectory":
            return run_trajectory(cfg)
        if cfg.command == "critical":
            return run_critical_radius(cfg)
        return run_verify(cfg)
    except BracketFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (DRPOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
