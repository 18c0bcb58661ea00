import math

import numpy as np
import pytest

from nlheat.errors import DegenerateGrid, InvalidParameter, InvalidSigma, OutOfDomain
from nlheat.lattice import ball_volume, build_grid, make_cylinder, make_time_grid


def test_interval_node_counts():
    g = build_grid([[0.0, 1.0]], 1 / 64, 2.0)
    assert g.n_interior == 63
    assert g.interior_nodes.min() == pytest.approx(1 / 64)
    assert g.interior_nodes.max() == pytest.approx(63 / 64)
    # collar reaches R_inf on both sides, boundary nodes included
    assert g.n_collar == 2 * (128 + 1)
    assert np.all(g.distance_to_domain(g.collar_nodes) <= 2.0 + 1e-12)


def test_rectangle_counts_and_lookup():
    g = build_grid([[0.0, 1.0], [0.0, 0.5]], 0.125, 2.5)
    assert g.n_interior == 7 * 3
    ids = g.lookup(g.interior_index)
    assert np.array_equal(ids, np.arange(g.n_interior))
    far = g.lookup(np.array([[10_000, 0]]))
    assert far[0] == -1


def test_r_inf_must_cover_twice_diameter():
    with pytest.raises(InvalidParameter):
        build_grid([[0.0, 1.0]], 0.1, 1.5)


def test_coarse_mesh_rejected():
    with pytest.raises(DegenerateGrid):
        build_grid([[0.0, 1.0]], 1.0, 2.0)


def test_bad_domain():
    with pytest.raises(InvalidParameter):
        build_grid([[1.0, 0.0]], 0.1, 4.0)


def test_default_time_step_is_h_to_2s():
    t = make_time_grid(1.0, h=1 / 16, s=0.25)
    assert t[0] == -1.0 and t[-1] == 0.0
    assert np.diff(t).max() <= 0.25 + 1e-12
    assert len(t) == 5


def test_time_grid_needs_step():
    with pytest.raises(InvalidParameter):
        make_time_grid(1.0)


@pytest.mark.parametrize("sigma", [0.0, 0.45, -0.1])
def test_sigma_constraint(sigma):
    with pytest.raises(InvalidSigma, match="0 < sigma <= 2/5"):
        make_cylinder(None, [0.5], 0.1, "plus", sigma=sigma)


def test_sigma_upper_end_allowed():
    cyl = make_cylinder(None, [0.5], 0.1, "plus", sigma=0.4)
    assert cyl.duration == pytest.approx(0.4 * 0.1)


def test_cylinder_intervals():
    s, r, sg = 0.5, 0.2, 0.3
    std = make_cylinder(None, [0.0], r, "standard", sg, s)
    fat = std.with_kind("fat")
    plus = std.with_kind("plus")
    minus = std.with_kind("minus")
    assert std.interval == pytest.approx((-0.2, 0.0))
    assert fat.interval == pytest.approx((-(2 - sg) * 0.2, 0.0))
    assert plus.interval == pytest.approx((-sg * 0.2, 0.0))
    assert minus.interval == pytest.approx((-(0.5 + sg) * 0.2, -0.1))
    assert std.analytic_measure == pytest.approx(ball_volume(1, r) * 0.2)
    assert ball_volume(2, 1.0) == pytest.approx(math.pi)


def test_membership_is_strict_in_space_and_half_open_in_time():
    g = build_grid([[0.0, 1.0]], 0.1, 2.0)
    times = np.linspace(-1.0, 0.0, 11)
    cyl = make_cylinder(g, [0.5], 0.2, "standard", 0.3, 0.5)
    nodes, steps = cyl.members(g, times)
    # |x - 0.5| < 0.2 excludes 0.3 and 0.7
    assert np.allclose(g.interior_nodes[nodes, 0], [0.4, 0.5, 0.6])
    # (-0.2, 0]: excludes -0.2, includes 0
    assert np.allclose(times[steps], [-0.1, 0.0])
    assert cyl.discrete_measure(g, times) == pytest.approx(3 * 0.1 * 2 * 0.1)


def test_cylinder_must_fit():
    g = build_grid([[0.0, 1.0]], 0.1, 2.0)
    with pytest.raises(OutOfDomain):
        make_cylinder(g, [0.1], 0.2)
    with pytest.raises(OutOfDomain):
        make_cylinder(g, [0.5], 0.2, T=0.1)
