import numpy as np
import pytest

from nlheat.errors import InvalidParameter, InvalidRadius, OutOfRange
from nlheat.lattice import build_grid
from nlheat.nonlocal_op import FarRule, SpaceTimeField
from nlheat.tail import TailQuery, parabolic_tail, tail_details


@pytest.fixture(scope="module")
def grid():
    return build_grid([[0.0, 1.0]], 1 / 64, 4.0)


def constant_field(grid, c=1.0, times=(0.0,)):
    return SpaceTimeField.from_function(grid, list(times), lambda x, t: np.full(len(x), c))


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_tail_of_one(grid, r, s):
    assert parabolic_tail(constant_field(grid), [0.5], r, s) == pytest.approx(1.0, abs=1e-3)


def test_annulus(grid):
    # indicator of r < |y - x0| < 2r gives 1 - 2^(-2s) = 1/2 at s = 1/2
    x0, r = 0.5 + 1 / 128, 8 / 64
    ann = SpaceTimeField.from_function(
        grid, [0.0], lambda x, t: ((np.abs(x[:, 0] - x0) > r) & (np.abs(x[:, 0] - x0) < 2 * r)).astype(float))
    assert parabolic_tail(ann, [x0], r, 0.5) == pytest.approx(0.5, abs=1e-3)


def test_tail_of_one_2d():
    g = build_grid([[0.0, 1.0], [0.0, 1.0]], 1 / 16, 3.0)
    one = constant_field(g)
    for r in (0.1, 0.3):
        assert parabolic_tail(one, [0.5, 0.5], r, 0.5) == pytest.approx(1.0, abs=2e-3)


def test_far_part_carries_most_mass_for_small_collar(grid):
    d = tail_details(TailQuery(constant_field(grid), (0.5,), 0.1, 0.5))
    assert 0 < d["far_fraction"] < 1


def test_parts_and_scaling(grid):
    u = SpaceTimeField.from_function(grid, [0.0], lambda x, t: np.sin(3 * x[:, 0]))
    a = parabolic_tail(u, [0.5], 0.2, 0.5, part="abs")
    p = parabolic_tail(u, [0.5], 0.2, 0.5, part="positive")
    n = parabolic_tail(u, [0.5], 0.2, 0.5, part="negative")
    assert a == pytest.approx(p + n, rel=1e-10)
    assert parabolic_tail(u.scaled(2.5), [0.5], 0.2, 0.5) == pytest.approx(2.5 * a, rel=1e-12)


def test_sup_over_time_window(grid):
    times = np.linspace(-1.0, 0.0, 11)
    u = SpaceTimeField.from_function(grid, times, lambda x, t: np.full(len(x), 1.0 + t))
    d = tail_details(TailQuery(u, (0.5,), 0.25, 0.5, t0=-0.5))
    # window (-0.75, -0.5]: largest value at t = -0.5
    assert d["time"] == pytest.approx(-0.5)
    assert d["value"] == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(OutOfRange):
        parabolic_tail(u, [0.5], 0.25, 0.5, t0=-0.9)


def test_constant_far_rule_matches_function_rule(grid):
    f1 = constant_field(grid, 2.0)
    f2 = SpaceTimeField(grid, f1.times, f1.interior.copy(), f1.collar.copy(), FarRule.constant(2.0))
    assert parabolic_tail(f1, [0.5], 0.3, 0.5) == pytest.approx(parabolic_tail(f2, [0.5], 0.3, 0.5), rel=1e-12)


def test_bad_arguments(grid):
    u = constant_field(grid)
    with pytest.raises(InvalidRadius):
        parabolic_tail(u, [0.5], 0.0, 0.5)
    with pytest.raises(InvalidParameter):
        parabolic_tail(u, [0.5], 0.1, 1.0)
    with pytest.raises(InvalidParameter):
        parabolic_tail(u, [0.5], 0.1, 0.5, part="median")
