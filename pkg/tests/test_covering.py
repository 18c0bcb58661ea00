import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covering_oracle import dilate_by_loops
from nlheat.covering import (CoveringHost, ParabolicPointSet, covering_dichotomy, dilate_set,
                             parabolic_distance, scale_grid)
from nlheat.errors import DichotomyViolation, IncompatibleFields, InvalidParameter, InvalidSigma

SMALL = CoveringHost(1, 6, 6)
HOST = CoveringHost(2, 8, 8)


def test_distance_future_is_infinite():
    assert parabolic_distance((0.0, 1.0), (0.0, 2.0), 0.3, 0.5) == math.inf
    assert parabolic_distance((0.0, 1.0), (0.0, 1.0), 0.3, 0.5) == math.inf


def test_distance_examples():
    assert parabolic_distance((0.0, 1.0), (0.0, 1.0 - 0.3), 0.3, 0.5) == pytest.approx(1.0)
    assert parabolic_distance((3.0, 1.0), (0.0, 0.7), 0.3, 0.5) == pytest.approx(3.0)
    assert parabolic_distance(([0.0, 0.0], 1.0), ([3.0, 4.0], 0.9), 0.2, 0.25) == pytest.approx(5.0)
    assert parabolic_distance((0.0, 1.0), (0.1, 0.7), 0.3, 0.25) == pytest.approx(1.0)


def test_host_layout():
    x, t = HOST.points
    assert x.shape == (512, 2) and t.shape == (512,)
    assert t.max() == pytest.approx(HOST.t0)
    assert t.min() > HOST.t0 - HOST.sigma * HOST.r ** (2 * HOST.s)
    assert HOST.measure == pytest.approx(4 * HOST.r ** 2 * HOST.sigma * HOST.r)
    with pytest.raises(InvalidSigma):
        CoveringHost(2, 8, 8, sigma=0.5)


def test_scale_grid_reaches_a_cell():
    rho = scale_grid(HOST, HOST.r)
    assert len(rho) >= 16 and np.all(np.diff(rho) < 0)
    assert math.pi * rho[-1] ** 2 * HOST.sigma * rho[-1] < HOST.cell


@pytest.mark.parametrize("gamma", [0.05, 0.3, 0.9])
def test_empty_set(gamma):
    E = ParabolicPointSet.empty(HOST)
    assert dilate_set(E, gamma).count == 0
    assert covering_dichotomy(E, gamma).holds


@pytest.mark.parametrize("gamma", [0.05, 0.3, 0.9])
def test_full_set(gamma):
    E = ParabolicPointSet.full(HOST)
    D = dilate_set(E, gamma)
    assert D.same_members(E)
    rep = covering_dichotomy(E, gamma)
    assert rep.full_branch and rep.holds


def test_invalid_gamma():
    E = ParabolicPointSet.empty(HOST)
    for g in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(InvalidParameter):
            dilate_set(E, g)


def test_mask_size_checked():
    with pytest.raises(IncompatibleFields):
        ParabolicPointSet(HOST, np.zeros(10, dtype=bool))


def test_rle_round_trip(rng):
    for density in (0.0, 0.2, 1.0):
        E = ParabolicPointSet.random(HOST, density, rng)
        text = E.to_rle()
        assert text.startswith("mask 8 8 8\n")
        assert ParabolicPointSet.from_rle(HOST, text).same_members(E)
    with pytest.raises(IncompatibleFields):
        ParabolicPointSet.from_rle(SMALL, E.to_rle())


@pytest.mark.parametrize("seed", range(6))
def test_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    E = ParabolicPointSet.random(SMALL, rng.uniform(0.02, 0.4), rng)
    gamma = float(rng.choice([0.05, 0.1, 0.3, 0.7]))
    assert np.array_equal(dilate_set(E, gamma).mask, np.array(dilate_by_loops(E, gamma)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 0.5), st.floats(0.02, 0.9))
def test_dilation_properties(seed, density, gamma):
    rng = np.random.default_rng(seed)
    E = ParabolicPointSet.random(HOST, density, rng)
    F = ParabolicPointSet(HOST, E.mask | (rng.random(HOST.size) < 0.1))
    D = dilate_set(E, gamma)
    assert E <= D
    assert D <= dilate_set(F, gamma)
    assert dilate_set(E, min(0.95, gamma * 1.5)) <= D
    assert covering_dichotomy(E, gamma).holds


def test_violation_raises_or_reports(monkeypatch):
    import nlheat.covering as cov
    E = ParabolicPointSet.random(HOST, 0.1, np.random.default_rng(3))
    monkeypatch.setattr(cov, "dilate_set", lambda E, g, rho_max=None: E)
    with pytest.raises(DichotomyViolation):
        cov.covering_dichotomy(E, 0.05)
    assert not cov.covering_dichotomy(E, 0.05, raise_on_failure=False).holds
