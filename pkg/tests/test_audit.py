import json
import math

import numpy as np
import pytest

from nlheat.audit import (OrderScenario, audit_boundedness, audit_caccioppoli, audit_harnack_suite,
                          audit_order_principles, space_cutoff, time_cutoff)
from nlheat.errors import DegenerateGrid, InvalidParameter, OutOfDomain
from nlheat.evolution import galerkin_solve, monotone_solve
from nlheat.nonlocal_op import SpaceTimeField

TIMES = np.linspace(-0.5, 0.0, 201)
C, R, r = [0.5], 0.4, 0.075


def const(grid, c, times=TIMES):
    return SpaceTimeField.from_function(grid, times, lambda x, t: np.full(len(x), float(c)))


def by_id(results):
    return {a.check_id: a for a in results}


def test_sign_principle(op1d):
    res = by_id(audit_order_principles(OrderScenario(op1d, TIMES, g=-1.0, h=-1.0)))
    assert res["order.sign"].passed and res["order.sign"].lhs <= 0
    assert res["order.sign"].tolerance == 0
    assert res["order.linf_bound"].passed
    assert res["order.comparison"].skipped


def test_comparison_principle(op1d):
    res = by_id(audit_order_principles(OrderScenario(op1d, TIMES, g=0.0, g2=1.0, h2=1.0)))
    assert res["order.comparison"].passed and res["order.comparison"].lhs <= 0


def test_sup_bound(op1d):
    g = lambda x, t: np.cos(4 * x[:, 0] + 10 * t)
    sc = OrderScenario(op1d, TIMES, g=g, h=lambda x: g(x, TIMES[0]))
    res = by_id(audit_order_principles(sc))
    assert res["order.linf_bound"].passed
    assert res["order.linf_bound"].rhs == pytest.approx(2.0, rel=1e-3)
    assert res["order.sign"].skipped


def test_unordered_data_skipped(op1d):
    res = by_id(audit_order_principles(OrderScenario(op1d, TIMES, g=1.0, g2=0.0)))
    assert res["order.comparison"].skipped
    assert "hypothesis-not-met" in res["order.comparison"].reason


def test_caccioppoli_zero_truncation(op1d):
    a = audit_caccioppoli(op1d, const(op1d.grid, 0.7), C, 0.1, 0.7, "+")
    assert a.lhs == 0 and a.rhs == 0 and a.passed


def test_caccioppoli_constant_truncation(op1d):
    # w = 1 everywhere: sup term = ||zeta||^2, energy equals the cutoff term, time term ~ ||zeta||^2
    g = op1d.grid
    a = audit_caccioppoli(op1d, const(g, 1.7), C, 0.1, 0.7, "+")
    z = space_cutoff(C, 0.1)(g.interior_nodes)
    norm2 = g.cell * float(np.sum(z ** 2))
    terms = dict(a.rhs_terms)
    assert a.params["lhs_sup"] == pytest.approx(norm2, rel=1e-12)
    assert a.params["lhs_energy"] == pytest.approx(terms["space_cutoff"], rel=1e-12)
    assert terms["time_cutoff"] == pytest.approx(norm2, rel=0.05)
    assert terms["tail"] > 0 and a.passed


def test_caccioppoli_below_level(op1d):
    a = audit_caccioppoli(op1d, const(op1d.grid, 0.2), C, 0.1, 0.7, "-")
    assert a.check_id == "caccioppoli.minus" and a.lhs > 0 and a.passed


def test_caccioppoli_arguments(op1d):
    u = const(op1d.grid, 1.0)
    with pytest.raises(InvalidParameter):
        audit_caccioppoli(op1d, u, C, 0.1, 0.0, "*")
    with pytest.raises(OutOfDomain):
        audit_caccioppoli(op1d, u, [0.1], 0.1, 0.0)
    with pytest.raises(OutOfDomain):
        audit_caccioppoli(op1d, const(op1d.grid, 1.0, TIMES[-20:]), C, 0.1, 0.0)


def test_cutoffs():
    z = space_cutoff([0.0], 1.0)
    x = np.array([[0.0], [0.49], [0.6], [0.76], [2.0]])
    v = z(x)
    assert v[0] == 1 and v[1] == 1 and 0 < v[2] < 1 and v[3] == 0 and v[4] == 0
    eta, deta = time_cutoff(0.0, 1.0)
    t = np.linspace(-0.5, 1.5, 2001)
    assert eta(-0.1) == 0 and eta(1.1) == 1
    assert np.all(deta(t) >= 0)
    assert np.trapezoid(deta(t), t) == pytest.approx(1.0, abs=1e-3)


def test_boundedness_constant(grid1d):
    res = by_id(audit_boundedness(const(grid1d, 1.0), C, 0.1, 0.5))
    d1 = res["boundedness.delta=1"]
    assert d1.passed and d1.empirical_constant < 1e-12
    assert d1.params["tail_positive"] == pytest.approx(1.0, abs=1e-3)
    assert res["boundedness.nonnegative"].empirical_constant == pytest.approx(1.0, rel=1e-12)


def test_boundedness_zero(grid1d):
    for a in audit_boundedness(const(grid1d, 0.0), C, 0.1, 0.5):
        assert a.passed and a.lhs == 0 and a.empirical_constant == 0


def test_boundedness_delta_range(grid1d):
    with pytest.raises(InvalidParameter):
        audit_boundedness(const(grid1d, 1.0), C, 0.1, 0.5, deltas=(1.5,))


def test_harnack_constant_field(grid1d):
    res = by_id(audit_harnack_suite(const(grid1d, 1.0), C, r, R, 0.5))
    for key in ("harnack.full", "harnack.tail_free", "harnack.tail_relation"):
        assert res[key].empirical_constant == pytest.approx(1.0, rel=1e-6)
    for p in (0.25, 0.5, 0.75):
        w = res[f"harnack.weak.p={p:g}"]
        assert w.lhs == pytest.approx(0.5 ** (1 / p), rel=1e-12) and w.passed


def test_harnack_results_sorted(grid1d):
    ids = [a.check_id for a in audit_harnack_suite(const(grid1d, 1.0), C, r, R, 0.5)]
    assert ids == sorted(ids)


def test_harnack_scaling_invariance(basis1d):
    u = galerkin_solve(basis1d, None, basis1d.mode(0), TIMES)
    base = by_id(audit_harnack_suite(u, C, r, R, 0.5))
    scaled = by_id(audit_harnack_suite(u.scaled(7.0), C, r, R, 0.5))
    for key, a in base.items():
        assert scaled[key].empirical_constant == pytest.approx(a.empirical_constant, rel=1e-10)
        assert scaled[key].passed == a.passed


def test_translation_invariance(basis1d, op1d):
    u = galerkin_solve(basis1d, None, basis1d.mode(0), TIMES)
    dt = 0.125
    a = audit_harnack_suite(u, C, r, R, 0.5)
    b = audit_harnack_suite(u.shifted(dt), C, r, R, 0.5, t0=dt)
    for x, y in zip(a, b):
        assert x.check_id == y.check_id
        assert y.lhs == pytest.approx(x.lhs, rel=1e-12)
        assert y.rhs == pytest.approx(x.rhs, rel=1e-12)
    c1 = audit_caccioppoli(op1d, u, C, 0.1, 0.0)
    c2 = audit_caccioppoli(op1d, u.shifted(dt), C, 0.1, 0.0, t0=dt)
    assert c2.lhs == pytest.approx(c1.lhs, rel=1e-12) and c2.rhs == pytest.approx(c1.rhs, rel=1e-12)


def test_harnack_negative_inside_is_skipped(op1d):
    u = monotone_solve(op1d, -1.0, None, -1.0, TIMES)
    assert all(a.skipped for a in audit_harnack_suite(u, C, r, R, 0.5))


def test_harnack_needs_five_r(grid1d):
    res = by_id(audit_harnack_suite(const(grid1d, 1.0), C, 0.1, 0.4, 0.5))
    assert res["harnack.full"].skipped and res["harnack.tail_free"].skipped
    assert not res["harnack.weak.p=0.5"].skipped


def test_harnack_zero_infimum_is_degenerate(grid1d):
    u = SpaceTimeField.from_function(grid1d, TIMES, lambda x, t: np.full(len(x), 1.0 if t < -0.03 else 0.0))
    res = by_id(audit_harnack_suite(u, C, r, R, 0.5))
    full = res["harnack.tail_free"]
    assert full.degenerate and math.isfinite(full.empirical_constant) and full.empirical_constant > 1e10


def test_empty_cylinder_errors(grid1d):
    coarse = np.linspace(-0.5, 0.0, 3)
    with pytest.raises(DegenerateGrid):
        audit_harnack_suite(const(grid1d, 1.0, coarse), C, r, R, 0.5)


def test_result_serializes(grid1d):
    u = SpaceTimeField.from_function(grid1d, TIMES, lambda x, t: np.full(len(x), 1.0 if t < -0.03 else 0.0))
    for a in audit_harnack_suite(u, C, r, R, 0.5):
        json.dumps(a.to_dict())
