"""Nonlocal parabolic tail

    T_r(u; x0, t0) = (2s / |S^{n-1}|) r^(2s) sup_{t0 - r^(2s) < t <= t0} int_{|y-x0|>r} |u(y,t)| |y-x0|^(-n-2s) dy.

Fields are read as piecewise constant on the lattice cells; the radial weight is
integrated over each cell (exactly in 1D, by sub-cell Gauss rules in 2D). Beyond
the lattice the field's exterior rule is integrated with a Gauss-Laguerre rule in
log-radius, which is exact for constant exterior values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameter, InvalidRadius, OutOfRange
from .kernel import SPHERE_MEASURE
from .lattice import Grid
from .nonlocal_op import FarRule, SpaceTimeField, far_directions

PARTS = ("abs", "positive", "negative")
_LAGUERRE = np.polynomial.laguerre.laggauss(24)
_MAX_STRETCH = math.log(1e15)
_GAUSS3 = np.polynomial.legendre.leggauss(3)
_GAUSS2 = np.polynomial.legendre.leggauss(2)
_CUT_SPLIT = 16


@dataclass(frozen=True, eq=False)
class TailQuery:
    field: SpaceTimeField
    center: tuple
    r: float
    s: float
    t0: float = 0.0
    part: str = "abs"


def _power_integral(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """int_a^b rho^(-1-2s) d rho for 0 < a <= b (elementwise)."""
    return (a ** (-2.0 * s) - b ** (-2.0 * s)) / (2.0 * s)


def _cell_weights_1d(grid: Grid, x0: float, r: float, s: float) -> tuple[np.ndarray, dict]:
    y = grid.all_nodes[:, 0]
    h = grid.h
    left, right = y - 0.5 * h - x0, y + 0.5 * h - x0
    w = np.zeros(len(y))
    # right of x0: rho in [max(left, 0), right]; left of x0: rho in [max(-right, 0), -left]
    for lo_, hi_ in ((np.maximum(left, 0.0), right), (np.maximum(-right, 0.0), -left)):
        a = np.maximum(lo_, r)
        ok = hi_ > a
        w[ok] += _power_integral(a[ok], hi_[ok], s)
    edges = {1.0: max(float(y.max() + 0.5 * h - x0), r), -1.0: max(float(x0 - (y.min() - 0.5 * h)), r)}
    return w, edges


def _cell_weights_2d(grid: Grid, x0: np.ndarray, r: float, s: float) -> tuple[np.ndarray, float]:
    h = grid.h
    R_cut = grid.R_inf - h
    if r >= R_cut:
        raise InvalidRadius(f"radius {r} reaches beyond the lattice (usable up to {R_cut:.6g})")
    pts = grid.all_nodes
    rel = pts - x0
    half = 0.5 * h
    near = np.linalg.norm(np.maximum(np.abs(rel) - half, 0.0), axis=1)
    far = np.linalg.norm(np.abs(rel) + half, axis=1)
    w = np.zeros(len(pts))
    active = (far > r) & (near < R_cut)
    cut = active & ((near < r) | (far > R_cut))
    whole = active & ~cut
    e = 2.0 + 2.0 * s

    def rule(centers, size, gauss):
        xg, wg = gauss
        gx, gy = np.meshgrid(xg * 0.5 * size, xg * 0.5 * size, indexing="ij")
        gw = np.outer(wg, wg).ravel() * (0.5 * size) ** 2
        q = centers[:, None, :] + np.stack([gx.ravel(), gy.ravel()], axis=1)[None]
        rho = np.linalg.norm(q, axis=2)
        return rho, gw

    rho, gw = rule(rel[whole], h, _GAUSS3)
    w[whole] = (rho ** (-e)) @ gw
    idx = np.flatnonzero(cut)
    if idx.size:
        sub = (np.arange(_CUT_SPLIT) + 0.5) / _CUT_SPLIT - 0.5
        sx, sy = np.meshgrid(sub * h, sub * h, indexing="ij")
        offs = np.stack([sx.ravel(), sy.ravel()], axis=1)
        for i in idx:
            rho, gw2 = rule(rel[i] + offs, h / _CUT_SPLIT, _GAUSS2)
            inside = (rho > r) & (rho <= R_cut)
            w[i] = float(np.sum(np.where(inside, rho ** (-e), 0.0) @ gw2))
    return w, R_cut


@lru_cache(maxsize=64)
def _weights(grid: Grid, center: tuple, r: float, s: float):
    if grid.dim == 1:
        return _cell_weights_1d(grid, center[0], r, s)
    return _cell_weights_2d(grid, np.asarray(center), r, s)


def _far_part(rule: FarRule, center: np.ndarray, s: float, t: float, starts: dict, n: int) -> float:
    """int over rays beyond each start radius of |exterior value| rho^(-1-2s) d rho, times angular weight."""
    if rule.kind == "zero":
        return 0.0
    x, wl = _LAGUERRE
    stretch = np.minimum(x / (2.0 * s), _MAX_STRETCH)
    total = 0.0
    for theta, (b, ang_w) in starts.items():
        radii = b * np.exp(stretch)
        pts = center[None, :] + radii[:, None] * np.asarray(theta)[None, :]
        vals = rule.evaluate(pts, t)
        total += ang_w * float(wl @ vals) * b ** (-2.0 * s) / (2.0 * s)
    return total


def _part_field(field: SpaceTimeField, part: str) -> SpaceTimeField:
    if part == "abs":
        return field.magnitude()
    if part == "positive":
        return field.positive_part()
    if part == "negative":
        return field.negative_part()
    raise InvalidParameter(f"tail component must be one of {PARTS}")


def tail_details(query: TailQuery) -> dict:
    field, r, s = query.field, float(query.r), float(query.s)
    if not r > 0:
        raise InvalidRadius("tail radius must be positive")
    if not 0 < s < 1:
        raise InvalidParameter("order s must lie in (0, 1)")
    grid = field.grid
    center = tuple(float(c) for c in np.atleast_1d(query.center))
    if len(center) != grid.dim:
        raise InvalidParameter("center dimension does not match the grid")
    times = field.times
    if len(times) == 1:
        steps = np.array([0])
    else:
        a, b = query.t0 - r ** (2.0 * s), query.t0
        slack = 1e-10 * max(1.0, abs(a), abs(b))
        if a < times[0] - slack or b > times[-1] + slack:
            raise OutOfRange(f"time window ({a:.6g}, {b:.6g}] leaves the field's time range")
        steps = np.flatnonzero((times > a + slack) & (times <= b + slack))
        if steps.size == 0:
            raise OutOfRange("no time samples inside the tail window")
    w, edges = _weights(grid, center, r, s)
    c = np.asarray(center)
    if grid.dim == 1:
        starts = {(theta,): (b, 1.0) for theta, b in edges.items()}
    else:
        dirs = far_directions(2)
        starts = {tuple(d): (edges, 2.0 * math.pi / len(dirs)) for d in dirs}
    piece = _part_field(field, query.part)
    vals = piece.all_values()
    lattice = vals[steps] @ w
    far = np.array([_far_part(piece.far, c, s, float(times[m]), starts, grid.dim) if piece.far is not None
                    else 0.0 for m in steps])
    totals = lattice + far
    k = int(np.argmax(totals))
    scale = 2.0 * s / SPHERE_MEASURE[grid.dim] * r ** (2.0 * s)
    return {"value": float(scale * totals[k]), "samples": int(steps.size),
            "time": float(times[steps[k]]), "far_fraction": float(far[k] / totals[k]) if totals[k] else 0.0}


def tail(query: TailQuery) -> float:
    return tail_details(query)["value"]


def parabolic_tail(field: SpaceTimeField, center, r: float, s: float, t0: float = 0.0,
                   part: str = "abs") -> float:
    return tail(TailQuery(field, tuple(np.atleast_1d(center)), r, s, t0, part))
