import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drpo.errors import (BadNormalization, DegenerateConstraints, InfeasibleRegion, RangeError,
                         SingularCovariance)
from drpo.market_data import Moments, ScenarioSet, empirical_moments, moments_unchecked
from drpo.oracles import cone_rayleigh_min, qp_projected_gradient, region_rows
from drpo.outer_solver import (FeasibleRegion, f_of_t, level_minimizer, reduce_active_set,
                               reduce_constraints, solve_bc_multistart, solve_bc_sdp_path, solve_wc)
from drpo.outer_solver.reduced import Quadratic, ReducedProblem, _solve_case, normalized_constraints


def _objective(m, delta, sign, w):
    return math.sqrt(w @ m.cov @ w) + sign * math.sqrt(delta) * np.linalg.norm(w)


def test_one_asset_infeasible():
    sc = ScenarioSet(np.array([1.0]), np.array([[1.1], [0.9]]))
    m = empirical_moments(sc)
    fr = FeasibleRegion(sc.s0, m.mean, 0.1, 0.01)
    with pytest.raises(InfeasibleRegion):
        solve_wc(m, 0.1, fr)
    assert solve_bc_multistart(m, 0.1, fr, raise_on_infeasible=False).status == "infeasible"


def test_equal_price_and_mean_infeasible():
    # a mean vector equal to the price vector leaves no strongly admissible portfolio;
    # these scenarios also have a rank-one covariance
    sc = ScenarioSet(np.array([1.0, 1.0]), np.array([[1.2, 0.9], [0.8, 1.1], [1.0, 1.0]]))
    with pytest.raises(SingularCovariance):
        empirical_moments(sc)
    m = moments_unchecked(sc)
    with pytest.raises(InfeasibleRegion):
        solve_wc(m, 0.1, FeasibleRegion(sc.s0, m.mean, 0.01, 0.01))


def test_returned_points_feasible(instances):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        for d in inst.deltas_wc:
            r = solve_wc(m, d, fr)
            assert r.status == "optimal" and r.kkt_residual <= 1e-6
            assert fr.is_feasible(r.w_star, tol=1e-8)
            assert r.value == pytest.approx(r.objective**2, rel=1e-14)
        for d in inst.deltas_bc:
            r = solve_bc_multistart(m, d, fr)
            assert r.status == "optimal"
            assert fr.is_feasible(r.w_star, tol=1e-8)
            assert r.restarts_used >= 1


def test_zero_radius_wc_equals_bc(instances):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        assert solve_wc(m, 0.0, fr).value == solve_bc_multistart(m, 0.0, fr).value


def test_zero_radius_matches_qp_oracle(instances):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        G, h = region_rows(inst.s0, m.mean, inst.alpha_tilde, inst.epsilon)
        qp = qp_projected_gradient(m.cov, G, h)
        assert solve_wc(m, 0.0, fr).value == pytest.approx(qp.value, abs=1e-6)
        assert solve_bc_sdp_path(m, 0.0, fr).value == pytest.approx(qp.value, abs=1e-6)


def test_values_monotone_in_delta(instances):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        wc = [solve_wc(m, d, fr).value for d in np.linspace(0, 1, 8)]
        assert all(b >= a - 1e-12 * abs(a) for a, b in zip(wc, wc[1:]))
        ds = np.linspace(0, max(inst.deltas_bc), 6)
        bc = [solve_bc_multistart(m, d, fr).value for d in ds]
        assert all(b <= a + 1e-10 * abs(a) for a, b in zip(bc, bc[1:]))


def test_wc_local_optimality(instances):
    rng = np.random.default_rng(0)
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        for d in inst.deltas_wc:
            w = solve_wc(m, d, fr).w_star.w
            f0 = _objective(m, d, 1.0, w)
            dirs = rng.standard_normal((1000, inst.n))
            dirs *= 1e-4 / np.linalg.norm(dirs, axis=1, keepdims=True)
            for u in dirs:
                if fr.is_feasible(w + u, tol=0.0):
                    assert _objective(m, d, 1.0, w + u) >= f0 - 1e-8


@pytest.mark.parametrize("c", [0.1, 3.0, 250.0])
def test_scale_covariance(instances, c):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        a = solve_wc(m, 0.1, fr)
        b = solve_wc(m, 0.1, fr.scaled(c))
        assert b.objective == pytest.approx(c * a.objective, rel=1e-8)
        np.testing.assert_allclose(b.w_star.w, c * a.w_star.w, rtol=1e-5, atol=1e-7 * c)
        d = inst.deltas_bc[0]
        a = solve_bc_multistart(m, d, fr)
        b = solve_bc_multistart(m, d, fr.scaled(c))
        assert b.objective == pytest.approx(c * a.objective, rel=1e-6)


def test_negative_objective_flags_arbitrage(instances):
    inst = instances[1]
    m, fr = inst.moments(), inst.region()
    G, h = region_rows(inst.s0, m.mean, inst.alpha_tilde, inst.epsilon)
    w = qp_projected_gradient(m.cov, G, h).w
    delta = 1.01 * (w @ m.cov @ w) / (w @ w)
    assert _objective(m, delta, -1.0, w) < 0
    for r in (solve_bc_multistart(m, delta, fr), solve_bc_sdp_path(m, delta, fr)):
        assert r.status == "unbounded"
        assert r.value == 0.0 and r.arbitrage
        assert fr.is_feasible(r.w_star)


def test_arbitrage_onset_is_cone_rayleigh_minimum(instances):
    for inst in instances:
        m, fr = inst.moments(), inst.region()
        d0 = cone_rayleigh_min(m.cov, inst.s0, m.mean)
        assert solve_bc_multistart(m, 0.98 * d0, fr).status == "optimal"
        assert solve_bc_multistart(m, 1.02 * d0, fr).status == "unbounded"


def test_reduce_coordinate_constraints():
    cov = np.diag([1.0, 2.0, 3.0])
    rp = reduce_constraints(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), cov, "both_active")
    assert rp.k == 1
    for x in (-2.0, 0.0, 0.7):
        w = rp.to_w([x])
        assert w[0] == pytest.approx(1.0, abs=1e-12) and w[1] == pytest.approx(1.0, abs=1e-12)
        assert rp.q1([x]) == pytest.approx(w @ cov @ w, rel=1e-12)
        assert rp.q2([x]) == pytest.approx(w @ w, rel=1e-12)


def test_reduce_errors():
    cov = np.eye(3)
    with pytest.raises(DegenerateConstraints):
        reduce_constraints(np.array([1.0, 1, 0]), np.array([2.0, 2, 0]), cov, "both_active")
    fr = FeasibleRegion(np.ones(3), np.ones(3), -0.1, 0.01)
    with pytest.raises(BadNormalization):
        normalized_constraints(fr)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 6), st.sampled_from(["both_active", "first_active", "second_active"]),
       st.integers(0, 2**32 - 1))
def test_reduction_identities(n, case, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    cov = A @ A.T + 0.1 * np.eye(n)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    rp = reduce_constraints(a, b, cov, case)
    for x in rng.standard_normal((100, rp.k)) * 3:
        w = rp.to_w(x)
        if case != "second_active":
            assert a @ w == pytest.approx(1.0, abs=1e-12)
        if case != "first_active":
            assert b @ w == pytest.approx(1.0, abs=1e-12)
        assert rp.q2(x) == pytest.approx(w @ w, rel=1e-10)
        assert rp.q1(x) == pytest.approx(w @ cov @ w, rel=1e-10)
    assert np.all(np.linalg.eigvalsh(rp.q1.Q) >= -1e-12)
    assert np.all(np.linalg.eigvalsh(rp.q2.Q) >= -1e-12)


def test_reduce_active_set_from_region(instances):
    inst = instances[1]
    m, fr = inst.moments(), inst.region()
    rp = reduce_active_set(fr, "both_active", m.cov)
    w = rp.to_w(np.array([0.3]))
    assert w @ inst.s0 == pytest.approx(-inst.epsilon, rel=1e-12)
    assert m.mean @ w == pytest.approx(inst.alpha_tilde, rel=1e-12)


def _one_dim(q1, q2):
    return ReducedProblem(np.zeros(1), np.zeros(1), "first_active", np.zeros(1), np.eye(1), q1, q2)


def test_f_of_t_identical_forms():
    rp = _one_dim(Quadratic(np.eye(1), np.zeros(1), 0.0), Quadratic(np.eye(1), np.zeros(1), 0.0))
    for t in (0.0, 1e-6, 0.5, 3.0, 1e4):
        assert f_of_t(rp, t) == pytest.approx(t, rel=1e-12, abs=1e-15)


def test_f_of_t_shifted():
    rp = _one_dim(Quadratic(np.eye(1), -np.ones(1), 1.0), Quadratic(np.eye(1), np.zeros(1), 0.0))
    for t in (0.01, 0.5, 1.0, 2.0, 9.0):
        assert f_of_t(rp, t) == pytest.approx((math.sqrt(t) - 1) ** 2, abs=1e-12)
        _, x = level_minimizer(rp, t)
        assert x[0] == pytest.approx(math.sqrt(t), rel=1e-10)
    with pytest.raises(RangeError):
        f_of_t(rp, -0.1)


def _random_pencil(seed, n=5):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    cov = A @ A.T / n + 0.05 * np.eye(n)
    return reduce_constraints(rng.standard_normal(n), rng.standard_normal(n), cov, "both_active")


def _sampled_min(rp, t, n_theta=1200, n_phi=600):
    # {q2 = t} is an ellipsoid around the minimiser of q2
    Q2, l2 = rp.q2.Q, rp.q2.l
    xc = -np.linalg.solve(Q2, l2)
    r2 = t - rp.q2(xc)
    L = np.linalg.cholesky(Q2)
    th, ph = np.meshgrid(np.linspace(0, np.pi, n_theta), np.linspace(0, 2 * np.pi, n_phi))
    U = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1).reshape(-1, 3)
    X = xc + math.sqrt(r2) * np.linalg.solve(L.T, U.T).T
    vals = np.einsum("ij,jk,ik->i", X, rp.q1.Q, X) + 2 * X @ rp.q1.l + rp.q1.c
    return float(vals.min())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_f_of_t_dense_sampling(seed):
    rp = _random_pencil(seed)
    assert rp.k == 3
    t0 = rp.t_min
    for t in (t0 + 0.01, t0 + 1.0, 4 * t0 + 10.0):
        oracle = _sampled_min(rp, t)
        f = f_of_t(rp, t)
        assert f <= oracle + 1e-12
        assert f == pytest.approx(oracle, abs=1e-4 * max(1.0, oracle))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 50), st.floats(0, 50))
def test_f_of_t_midpoint_convex(seed, u, v):
    rp = _random_pencil(seed % 1000, n=4)
    t1, t2 = rp.t_min + u, rp.t_min + v
    mid = f_of_t(rp, 0.5 * (t1 + t2))
    assert mid <= 0.5 * (f_of_t(rp, t1) + f_of_t(rp, t2)) + 1e-8


def test_sdp_path_matches_multistart(instances):
    for inst in instances:
        if inst.n != 3:
            continue
        m, fr = inst.moments(), inst.region()
        for d in inst.deltas_bc:
            a = solve_bc_sdp_path(m, d, fr)
            b = solve_bc_multistart(m, d, fr)
            assert "fallback" not in a.flags
            assert a.value == pytest.approx(b.value, rel=1e-4)


def test_sdp_path_single_active_case(instances):
    inst = next(i for i in instances if i.name == "n3_short_active")
    m, fr = inst.moments(), inst.region()
    d = inst.deltas_bc[0]
    r = solve_bc_sdp_path(m, d, fr)
    assert r.flags == ("case=first_active",)
    a, b = normalized_constraints(fr)
    both = _solve_case(m.cov, d, a, b, "both_active")
    assert not both.valid or both.objective >= r.objective
    assert m.mean @ r.w_star.w > inst.alpha_tilde * (1 + 1e-6)


def test_sdp_path_falls_back():
    rng = np.random.default_rng(3)
    sc = ScenarioSet(np.ones(3), 1 + 0.2 * rng.standard_normal((12, 3)))
    m = empirical_moments(sc)
    fr = FeasibleRegion(sc.s0, m.mean, -0.5, 0.01)
    r = solve_bc_sdp_path(m, 0.001, fr)
    assert "fallback" in r.flags


def test_sdp_path_accepts_moments_only():
    m = Moments(np.array([1.1, 0.9, 1.0]), np.diag([0.04, 0.09, 0.01]) + 0.005)
    fr = FeasibleRegion(np.array([1.0, 1.0, 1.0]), m.mean, 0.01, 0.01)
    a = solve_bc_sdp_path(m, 1e-3, fr)
    b = solve_bc_multistart(m, 1e-3, fr)
    assert a.value == pytest.approx(b.value, rel=1e-4)
