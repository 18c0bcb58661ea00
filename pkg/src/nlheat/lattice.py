"""Uniform lattices on intervals/rectangles with an exterior collar, and parabolic cylinders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateGrid, InvalidParameter, InvalidSigma, OutOfDomain

SIGMA_MAX = 0.4
DEFAULT_SIGMA = 0.3
CYLINDER_KINDS = ("standard", "fat", "plus", "minus")

# slack for comparing lattice coordinates and time nodes against cylinder boundaries
_EPS = 1e-10


def ball_volume(n: int, r: float) -> float:
    return 2.0 * r if n == 1 else math.pi * r * r


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes lo + k*h strictly inside the box, plus collar nodes within R_inf of it.

    Global node numbering puts interior nodes first, then collar nodes.
    """

    dim: int
    bounds: np.ndarray
    h: float
    R_inf: float
    interior_index: np.ndarray = field(repr=False)
    collar_index: np.ndarray = field(repr=False)
    index_map: np.ndarray = field(repr=False)
    map_origin: np.ndarray = field(repr=False)

    @property
    def lo(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def n_interior(self) -> int:
        return len(self.interior_index)

    @property
    def n_collar(self) -> int:
        return len(self.collar_index)

    @property
    def cell(self) -> float:
        return self.h ** self.dim

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return self.lo + self.interior_index * self.h

    @cached_property
    def collar_nodes(self) -> np.ndarray:
        return self.lo + self.collar_index * self.h

    @cached_property
    def all_nodes(self) -> np.ndarray:
        return np.vstack([self.interior_nodes, self.collar_nodes])

    @cached_property
    def all_index(self) -> np.ndarray:
        return np.vstack([self.interior_index, self.collar_index])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.bounds[:, 1] - self.bounds[:, 0]))

    def lookup(self, index: np.ndarray) -> np.ndarray:
        """Global node numbers for integer lattice indices; -1 where no node exists."""
        idx = np.asarray(index) - self.map_origin
        shape = np.array(self.index_map.shape)
        ok = np.all((idx >= 0) & (idx < shape), axis=-1)
        out = np.full(idx.shape[:-1], -1, dtype=np.int64)
        safe = np.where(ok[..., None], idx, 0)
        out[ok] = self.index_map[tuple(safe[ok].T)]
        return out

    def node_count(self) -> dict:
        return {"interior": self.n_interior, "collar": self.n_collar}

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "bounds": self.bounds.tolist(),
            "h": self.h,
            "R_inf": self.R_inf,
            "interior_nodes": self.n_interior,
            "collar_nodes": self.n_collar,
        }

    def distance_to_domain(self, points: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
        return np.linalg.norm(gap, axis=-1)


def build_grid(domain, h: float, R_inf: float) -> Grid:
    """Lattice for the open box `domain` (list of (lo, hi) per axis) with spacing h."""
    bounds = np.atleast_2d(np.asarray(domain, dtype=float))
    n = bounds.shape[0]
    if n not in (1, 2) or bounds.shape[1] != 2:
        raise InvalidParameter("domain must be an interval or a rectangle given as [[lo, hi], ...]")
    if np.any(bounds[:, 1] <= bounds[:, 0]):
        raise InvalidParameter("domain bounds must satisfy lo < hi")
    if not h > 0:
        raise InvalidParameter("mesh width h must be positive")
    extent = bounds[:, 1] - bounds[:, 0]
    if np.any(h >= extent):
        raise DegenerateGrid(f"h={h} is not smaller than the domain extent {extent.tolist()}")
    diam = float(np.linalg.norm(extent))
    if R_inf < 2.0 * diam * (1 - 1e-12):
        raise InvalidParameter(f"R_inf={R_inf} must be at least twice the domain diameter {diam:.6g}")

    # interior: lo + k h < hi with k >= 1
    k_hi = [int(math.ceil(e / h - 1e-9)) - 1 for e in extent]
    if min(k_hi) < 1:
        raise DegenerateGrid("grid has no interior nodes")
    reach = int(math.floor(R_inf / h + 1e-9))
    axes = [np.arange(-reach, kh + 1 + reach + 1) for kh in k_hi]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pts = bounds[:, 0] + mesh * h
    inside = np.all((pts > bounds[:, 0] + _EPS * h) & (pts < bounds[:, 1] - _EPS * h), axis=1)
    gap = np.maximum(np.maximum(bounds[:, 0] - pts, pts - bounds[:, 1]), 0.0)
    near = np.linalg.norm(gap, axis=1) <= R_inf + _EPS * h
    interior = mesh[inside]
    collar = mesh[~inside & near]
    origin = np.array([a[0] for a in axes])
    index_map = np.full([len(a) for a in axes], -1, dtype=np.int64)
    index_map[tuple((interior - origin).T)] = np.arange(len(interior))
    index_map[tuple((collar - origin).T)] = len(interior) + np.arange(len(collar))
    return Grid(
        dim=n, bounds=bounds, h=float(h), R_inf=float(R_inf),
        interior_index=interior, collar_index=collar,
        index_map=index_map, map_origin=origin,
    )


def make_time_grid(T: float, dt: float | None = None, *, h: float | None = None,
                   s: float | None = None, steps: int | None = None) -> np.ndarray:
    """Uniform nodes t_m = -T + m*dt from -T to 0; default dt = h^(2s)."""
    if not T > 0:
        raise InvalidParameter("horizon T must be positive")
    if steps is None:
        if dt is None:
            if h is None or s is None:
                raise InvalidParameter("need dt, steps, or (h, s) for the default step h^(2s)")
            dt = h ** (2.0 * s)
        if not dt > 0:
            raise InvalidParameter("time step must be positive")
        steps = max(1, int(math.ceil(T / dt - 1e-9)))
    times = -T + T * np.arange(steps + 1) / steps
    times[-1] = 0.0
    return times


@dataclass(frozen=True)
class Cylinder:
    """B_r(center) times a half-open time interval (a, b] determined by kind."""

    center: tuple
    t0: float
    r: float
    kind: str
    sigma: float
    s: float

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def interval(self) -> tuple[float, float]:
        scale = self.r ** (2.0 * self.s)
        t0, sg = self.t0, self.sigma
        if self.kind == "standard":
            return t0 - scale, t0
        if self.kind == "fat":
            return t0 - (2.0 - sg) * scale, t0
        if self.kind == "plus":
            return t0 - sg * scale, t0
        return t0 - (0.5 + sg) * scale, t0 - 0.5 * scale

    @property
    def duration(self) -> float:
        a, b = self.interval
        return b - a

    @property
    def analytic_measure(self) -> float:
        return ball_volume(self.dim, self.r) * self.duration

    def space_mask(self, points: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.atleast_2d(points) - np.asarray(self.center), axis=1)
        return d < self.r * (1.0 - _EPS)

    def time_mask(self, times: np.ndarray) -> np.ndarray:
        a, b = self.interval
        slack = _EPS * max(1.0, abs(a), abs(b))
        times = np.asarray(times)
        return (times > a + slack) & (times <= b + slack)

    def members(self, grid: Grid, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interior node numbers and time indices inside the cylinder."""
        return np.flatnonzero(self.space_mask(grid.interior_nodes)), np.flatnonzero(self.time_mask(times))

    def discrete_measure(self, grid: Grid, times: np.ndarray) -> float:
        nodes, steps = self.members(grid, times)
        dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
        return len(nodes) * grid.cell * len(steps) * dt

    def with_kind(self, kind: str, r: float | None = None) -> "Cylinder":
        return Cylinder(self.center, self.t0, self.r if r is None else r, kind, self.sigma, self.s)

    def describe(self) -> dict:
        a, b = self.interval
        return {"center": list(self.center), "t0": self.t0, "r": self.r, "kind": self.kind,
                "sigma": self.sigma, "interval": [a, b]}


def check_sigma(sigma: float) -> None:
    if not (0.0 < sigma <= SIGMA_MAX):
        raise InvalidSigma(f"sigma={sigma} violates the constraint 0 < sigma <= 2/5")


def make_cylinder(grid: Grid | None, center, r: float, kind: str = "standard",
                  sigma: float = DEFAULT_SIGMA, s: float = 0.5, t0: float = 0.0,
                  T: float | None = None) -> Cylinder:
    """Cylinder of the given kind; checks containment in the domain and in (-T, 0] when known."""
    check_sigma(sigma)
    if kind not in CYLINDER_KINDS:
        raise InvalidParameter(f"unknown cylinder kind {kind!r}")
    if not r > 0:
        raise InvalidParameter("cylinder radius must be positive")
    center = tuple(float(c) for c in np.atleast_1d(center))
    cyl = Cylinder(center, float(t0), float(r), kind, float(sigma), float(s))
    if grid is not None:
        if len(center) != grid.dim:
            raise InvalidParameter("cylinder center dimension does not match the grid")
        c = np.asarray(center)
        room = np.min(np.minimum(c - grid.bounds[:, 0], grid.bounds[:, 1] - c))
        if room < r * (1.0 - _EPS):
            raise OutOfDomain(f"ball of radius {r} about {list(center)} leaves the domain")
    a, b = cyl.interval
    if T is not None and (a < -T - _EPS * max(1.0, T) or b > _EPS):
        raise OutOfDomain(f"time interval ({a:.6g}, {b:.6g}] leaves (-{T}, 0]")
    return cyl
