import numpy as np
import pytest

from drpo.errors import CapExceeded, InfeasibleRegion, RestrictionError
from drpo.market_data import ScenarioSet, empirical_moments
from drpo.oracles import grid_search
from drpo.outer_solver import FeasibleRegion, solve_bc_multistart, solve_wc
from drpo.restrictions import (RestrictionSet, convex_constraints, enumerate_nonconvex,
                               satisfies, validate)


def test_validate_examples():
    assert validate(RestrictionSet(), 3) == []
    assert validate(RestrictionSet.no_restriction(3), 3) == []
    assert validate(RestrictionSet(cardinality=4), 3)
    assert validate(RestrictionSet(min_position=2.0, max_position=1.0), 3)


def test_validate_reports_every_problem():
    rs = RestrictionSet(short_floors=(0.0,), min_position=-1.0, cardinality=0,
                        groups=(((0, 5), -1.0), ((), 1.0)))
    errs = validate(rs, 3)
    assert len(errs) >= 6


def test_region_rejects_invalid_restrictions(instances):
    with pytest.raises(RestrictionError):
        instances[0].region(RestrictionSet(cardinality=5))


def test_json_round_trip():
    rs = RestrictionSet(short_floors=(-1, -2, 0), min_position=0.1, max_position=3.0,
                        cardinality=2, groups=(((0, 2), 1.5),), card_threshold=1e-3)
    assert RestrictionSet.from_dict(rs.to_dict()) == rs
    assert RestrictionSet.from_json('{"groups": [[[0, 1], 2]]}').groups == (((0, 1), 2.0),)
    with pytest.raises(RestrictionError):
        RestrictionSet.from_dict({"max_pos": 1})


def test_convex_constraints_split_absolute_values():
    cons = convex_constraints(RestrictionSet(max_position=2.0, groups=(((0, 1), 1.0),)), 2)
    assert len(cons) == 6
    assert all(c.kind == "le" for c in cons)
    w_in, w_out = np.array([1.5, -1.2]), np.array([1.5, -0.2])
    assert all(c.coef @ w_in <= c.bound for c in cons)
    assert not all(c.coef @ w_out <= c.bound for c in cons)


def test_inactive_values_emit_nothing():
    for n in (1, 3, 6):
        rs = RestrictionSet.no_restriction(n, groups=[range(n)])
        assert convex_constraints(rs, n) == []
        assert rs.is_empty(n)
        assert len(enumerate_nonconvex(rs, n)) == 1


def test_enumeration_counts():
    assert len(enumerate_nonconvex(RestrictionSet(cardinality=3), 3)) == 1
    # exactly-m supports cover the smaller ones when a weight may sit at zero
    assert [s.support for s in enumerate_nonconvex(RestrictionSet(cardinality=1), 2)] == [(0,), (1,)]
    assert len(enumerate_nonconvex(RestrictionSet(min_position=0.1), 2)) == 4
    assert len(enumerate_nonconvex(RestrictionSet(min_position=0.1), 3)) == 8
    # semicontinuous: sizes 1 and 2 with all sign patterns: 3*2 + 3*4
    assert len(enumerate_nonconvex(RestrictionSet(min_position=0.1, cardinality=2), 3)) == 18
    with pytest.raises(CapExceeded):
        enumerate_nonconvex(RestrictionSet(cardinality=2), 13)
    assert len(enumerate_nonconvex(RestrictionSet(cardinality=2), 13, cap=13)) == 78


def test_satisfies_raw_constraints():
    rs = RestrictionSet(min_position=0.5, cardinality=2)
    assert satisfies(rs, [0.6, 0.0, -0.5], 1e-6)
    assert not satisfies(rs, [0.6, 0.1, -0.5], 1e-6)
    assert not satisfies(rs, [0.6, 0.7, -0.5], 1e-6)
    assert satisfies(RestrictionSet(min_position=0.5), [0.5, -0.7], 1e-6)
    assert not satisfies(RestrictionSet(min_position=0.5), [0.0, -0.7], 1e-6)


def test_long_only_infeasible_with_positive_prices(instances):
    inst = instances[0]
    fr = inst.region(RestrictionSet(short_floors=(0.0, 0.0)))
    with pytest.raises(InfeasibleRegion):
        solve_wc(inst.moments(), 0.1, fr)
    assert solve_wc(inst.moments(), 0.1, fr, raise_on_infeasible=False).status == "infeasible"


def test_long_only_region_respected():
    # a negative price makes long positions able to raise cash
    s0 = np.array([1.0, -0.5])
    x = np.array([[1.2, -0.3], [0.9, -0.6], [1.1, -0.4], [1.0, -0.2]])
    m = empirical_moments(ScenarioSet(s0, x))
    fr = FeasibleRegion(s0, m.mean, -10.0, 0.01, RestrictionSet(short_floors=(0.0, 0.0)))
    r = solve_wc(m, 0.1, fr)
    assert np.all(r.w_star.w >= -1e-8)
    g = grid_search(m.cov, s0, m.mean, -10.0, 0.01, [(0.1, 1.0)], box=1.0, step=0.002,
                    restrictions=fr.restrictions)[0]
    assert np.sqrt(r.value) == pytest.approx(g.objective, abs=1e-4)


def test_big_max_position_is_inactive(instances):
    inst = instances[1]
    m = inst.moments()
    a = solve_wc(m, 0.1, inst.region())
    b = solve_wc(m, 0.1, inst.region(RestrictionSet(max_position=1e3)))
    assert b.value == pytest.approx(a.value, rel=1e-8)
    np.testing.assert_allclose(b.w_star.w, a.w_star.w, atol=1e-6)


def test_zero_group_cap_forces_equality(instances):
    inst = instances[1]
    fr = inst.region(RestrictionSet(groups=(((0, 1), 0.0),)))
    for r in (solve_wc(inst.moments(), 0.1, fr), solve_bc_multistart(inst.moments(), 0.005, fr)):
        assert r.w_star.w[0] + r.w_star.w[1] == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("delta", [0.0, 0.1, 1.0])
def test_no_restriction_bit_for_bit(instances, delta):
    for inst in instances:
        m = inst.moments()
        rs = RestrictionSet.no_restriction(inst.n, groups=[range(inst.n)])
        a = solve_wc(m, delta, inst.region())
        b = solve_wc(m, delta, inst.region(rs))
        assert a.value == b.value
        np.testing.assert_array_equal(a.w_star.w, b.w_star.w)


def test_restricted_wc_never_better(instances):
    inst = instances[1]
    m = inst.moments()
    free = solve_wc(m, 0.1, inst.region()).value
    for rs in (RestrictionSet(cardinality=2), RestrictionSet(min_position=0.5),
               RestrictionSet(max_position=2.0), RestrictionSet(groups=(((0, 1), 1.0),))):
        assert solve_wc(m, 0.1, inst.region(rs)).value >= free * (1 - 1e-10)


def test_cardinality_solution_support(instances):
    inst = instances[1]
    fr = inst.region(RestrictionSet(cardinality=2))
    r = solve_wc(inst.moments(), 0.1, fr)
    assert np.sum(np.abs(r.w_star.w) > fr.card_threshold + 1e-8) <= 2
    assert fr.is_feasible(r.w_star)


def test_enumeration_with_threshold():
    regs = enumerate_nonconvex(RestrictionSet(cardinality=1), 2, threshold=0.1)
    assert len(regs) == 2
    assert all(r.support == (0, 1) and len(r.constraints) == 2 for r in regs)
    # minimum below the threshold: counted, zero or small uncounted states per position
    regs = enumerate_nonconvex(RestrictionSet(min_position=0.05, cardinality=1), 2, threshold=0.1)
    assert len(regs) == (9 - 1) + 2 * 2 * 3
    # minimum above the threshold: uncounted positions must be zero
    regs = enumerate_nonconvex(RestrictionSet(min_position=0.5, cardinality=1), 2, threshold=0.1)
    assert len(regs) == 4


def test_small_positions_are_uncounted():
    rs = RestrictionSet(cardinality=1)
    assert satisfies(rs, [2.0, 0.1], 0.1)
    assert not satisfies(rs, [2.0, 0.11], 0.1)
