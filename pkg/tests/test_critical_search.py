import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drpo.critical_search import (INFINITE, UNDEFINED, ProblemInputs, RobustnessResult, ThetaStar,
                                  bisect_threshold, critical_radius, critical_radius_bc,
                                  critical_radius_wc, g_alpha, is_monotone, theta_star, trajectory)
from drpo.errors import BracketFailure, DomainError
from drpo.market_data import Moments
from drpo.oracles import cone_rayleigh_min
from drpo.outer_solver import FeasibleRegion


def wc_closed(delta):
    return (1 + math.sqrt(delta)) ** 2, 1.0


def bc_closed(delta):
    return max(1 - math.sqrt(delta), 0.0) ** 2, 1.0


def test_g_alpha_examples():
    assert g_alpha(2, 2) == 1
    assert g_alpha(0, 5.0) == 0
    assert g_alpha(3, 1) == 9
    assert g_alpha(3, math.inf) == 0
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            g_alpha(1.0, bad)


def test_theta_star_examples():
    assert theta_star(2, 4) == ThetaStar.finite(1.0)
    assert theta_star(1, 0) == INFINITE and theta_star(1, 0).is_infinite
    assert theta_star(0, 0) == UNDEFINED and not theta_star(0, 0).is_defined
    assert theta_star(0, 4).as_float() == 0.0
    assert str(INFINITE) == "INF"
    with pytest.raises(DomainError):
        theta_star(-1.0, 1.0)


def test_theta_star_ordering():
    a, b = ThetaStar.finite(1.0), ThetaStar.finite(2.0)
    assert a <= b and b >= a and b <= INFINITE and not INFINITE <= b
    with pytest.raises(DomainError):
        UNDEFINED <= a


def test_robustness_result_invariants():
    r = RobustnessResult.from_values(0.5, 0.0, 1.0)
    assert r.arbitrage and r.theta_star.is_infinite
    r = RobustnessResult.from_values(0.5, 4.0, 2.0)
    assert not r.arbitrage and r.theta_star.as_float() == 1.0
    r = RobustnessResult.from_values(0.5, 0.0, 0.0)
    assert not r.arbitrage and not r.theta_star.is_defined


@settings(max_examples=300)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_theta_round_trip(alpha, theta):
    assert theta_star(alpha, g_alpha(alpha, theta)).as_float() == pytest.approx(theta, rel=1e-12)


def test_closed_form_radii():
    wc = critical_radius_wc(0.5, wc_closed, tol=1e-6)  # g = 4
    assert wc.delta_critical == pytest.approx(1.0, abs=1e-6)
    assert wc.bracket[1] - wc.bracket[0] <= 1e-6 and wc.iterations <= 60
    bc = critical_radius_bc(2.0, bc_closed, tol=1e-6)  # g = 0.25
    assert bc.delta_critical == pytest.approx(0.25, abs=1e-6)
    assert bc.iterations <= 60


def test_one_sided_crossing():
    wc = critical_radius_wc(0.5, wc_closed, tol=1e-6)
    lo, hi = wc.bracket
    assert wc_closed(lo)[0] < 4.0 <= wc_closed(hi)[0]
    assert abs(wc_closed(wc.delta_critical)[0] - 4.0) < 1e-5


def test_boundary_returns_zero():
    assert critical_radius_wc(1.0, wc_closed).delta_critical == 0.0
    assert critical_radius_bc(1.0, bc_closed).delta_critical == 0.0


def test_bc_zero_plateau_gives_infimum():
    r = critical_radius_bc(math.inf, bc_closed, tol=1e-8)
    assert r.delta_critical == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x0", [1e-3, 0.37, 1.0, 5.5, 1234.5])
@pytest.mark.parametrize("tol", [1e-3, 1e-6, 1e-9])
def test_bisection_iteration_bound(x0, tol):
    lo, hi, it, _, (a, b) = bisect_threshold(lambda x: x >= x0, tol=tol)
    assert lo < x0 <= hi and hi - lo <= tol
    assert it <= math.ceil(math.log2((b - a) / tol))


def test_bracket_failure():
    with pytest.raises(BracketFailure):
        critical_radius_wc(0.1, lambda d: (1.0, 1.0), cap=1e6)
    with pytest.raises(BracketFailure):
        bisect_threshold(lambda x: False, hi=10.0)


def test_invalid_mode():
    with pytest.raises(ValueError):
        critical_radius(1.0, wc_closed, "xx")


@pytest.fixture(scope="module")
def synth_problem(synthetic):
    _, sc, m = synthetic
    return ProblemInputs(m, FeasibleRegion.from_data(sc, m, 1.0))


def test_synthetic_trajectories_short(synth_problem):
    ds = [0.0, 1.0, 10.0, 100.0]
    wc = trajectory(ds, "wc", synth_problem)
    assert all(r.ok for r in wc) and is_monotone(wc, "down")
    assert wc[0].theta_star.as_float() == pytest.approx(2.3106, abs=1e-3)
    bc = trajectory([0.0, 1.0, 2.5, 5.0], "bc", synth_problem)
    assert is_monotone(bc, "up")
    assert bc[-1].theta_star.is_infinite and bc[-1].arbitrage


def test_synthetic_onset_matches_cone_oracle(synthetic, synth_problem):
    _, sc, m = synthetic
    onset = critical_radius_bc(math.inf, synth_problem, tol=1e-5)
    d0 = cone_rayleigh_min(m.cov, sc.s0, m.mean)
    assert onset.delta_critical == pytest.approx(d0, abs=1e-4)


def test_trajectory_rejects_bad_radii(synth_problem):
    with pytest.raises(DomainError):
        trajectory([1.0, 0.5], "wc", synth_problem)
    with pytest.raises(DomainError):
        trajectory([-1.0], "wc", synth_problem)


def test_trajectory_keeps_failed_points():
    sc_mean = np.array([1.0])
    prob = ProblemInputs(Moments(sc_mean, np.eye(1) * 0.01),
                         FeasibleRegion(np.array([1.0]), sc_mean, 0.1, 0.01))
    out = trajectory([0.0, 1.0], "wc", prob)
    assert len(out) == 2 and all(not r.ok for r in out)


def test_parallel_matches_sequential(synth_problem):
    ds = [0.0, 10.0, 100.0]
    a = trajectory(ds, "wc", synth_problem)
    b = trajectory(ds, "wc", synth_problem, parallel=True, workers=2)
    for x, y in zip(a, b):
        assert x.value == pytest.approx(y.value, rel=1e-9)
