"""Parabolic distance, density dilations of lattice point sets, and the covering dichotomy.

A host cylinder is a box of side^n lattice cells times `steps` time slabs, sitting
in B_r x (t0 - sigma r^(2s), t0]. Point sets are boolean masks over its members,
ordered time-major (time index slowest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DichotomyViolation, IncompatibleFields, InvalidParameter
from .lattice import ball_volume, check_sigma

SCALE_RATIO = 2.0 ** -0.25
MIN_SCALES = 16
_SLACK = 1e-10


def parabolic_distance(X, Y, sigma: float, s: float) -> float:
    """Distance from X = (x, t) to Y = (y, tau); infinite unless Y lies strictly in the past of X."""
    x, t = X
    y, tau = Y
    if tau >= t:
        return math.inf
    dx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))))
    return max(dx, (abs(t - tau) / sigma) ** (1.0 / (2.0 * s)))


@dataclass(frozen=True, eq=False)
class CoveringHost:
    dim: int
    side: int
    steps: int
    r: float = 0.5
    sigma: float = 0.3
    s: float = 0.5
    t0: float = 0.0

    def __post_init__(self):
        check_sigma(self.sigma)
        if self.dim not in (1, 2) or self.side < 1 or self.steps < 1:
            raise InvalidParameter("host needs dim in {1, 2} and positive side and step counts")

    @property
    def h(self) -> float:
        return 2.0 * self.r / self.side

    @property
    def dt(self) -> float:
        return self.sigma * self.r ** (2.0 * self.s) / self.steps

    @property
    def cell(self) -> float:
        return self.h ** self.dim * self.dt

    @property
    def size(self) -> int:
        return self.side ** self.dim * self.steps

    @property
    def measure(self) -> float:
        return self.size * self.cell

    @property
    def shape(self) -> tuple:
        return (self.steps,) + (self.side,) * self.dim

    @property
    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial coordinates (P, n) and times (P,) of the members."""
        axis = -self.r + (np.arange(self.side) + 0.5) * self.h
        t = self.t0 - self.sigma * self.r ** (2.0 * self.s) + (np.arange(self.steps) + 1) * self.dt
        grids = np.meshgrid(t, *([axis] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids[1:]], axis=1), grids[0].ravel()

    def describe(self) -> dict:
        return {"dim": self.dim, "side": self.side, "steps": self.steps, "r": self.r,
                "sigma": self.sigma, "s": self.s, "t0": self.t0, "h": self.h, "dt": self.dt}


@dataclass(frozen=True, eq=False)
class ParabolicPointSet:
    host: CoveringHost
    mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).ravel()
        if m.size != self.host.size:
            raise IncompatibleFields(f"mask has {m.size} entries, host has {self.host.size} members")
        object.__setattr__(self, "mask", m)
        m.flags.writeable = False

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.count * self.host.cell

    def __le__(self, other: "ParabolicPointSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def same_members(self, other: "ParabolicPointSet") -> bool:
        return bool(np.array_equal(self.mask, other.mask))

    @classmethod
    def empty(cls, host: CoveringHost) -> "ParabolicPointSet":
        return cls(host, np.zeros(host.size, dtype=bool))

    @classmethod
    def full(cls, host: CoveringHost) -> "ParabolicPointSet":
        return cls(host, np.ones(host.size, dtype=bool))

    @classmethod
    def random(cls, host: CoveringHost, density: float, rng: np.random.Generator) -> "ParabolicPointSet":
        return cls(host, rng.random(host.size) < density)

    def to_rle(self) -> str:
        """Run-length text: a header line with the host shape, then 'value:count' runs."""
        m = self.mask.astype(np.int8)
        edges = np.flatnonzero(np.diff(m)) + 1
        starts = np.concatenate([[0], edges])
        lengths = np.diff(np.concatenate([starts, [m.size]]))
        runs = " ".join(f"{m[a]}:{k}" for a, k in zip(starts, lengths))
        return f"mask {' '.join(str(d) for d in self.host.shape)}\n{runs}\n"

    @classmethod
    def from_rle(cls, host: CoveringHost, text: str) -> "ParabolicPointSet":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("mask"):
            raise InvalidParameter("run-length mask must start with a 'mask' header")
        shape = tuple(int(v) for v in lines[0].split()[1:])
        if shape != host.shape:
            raise IncompatibleFields(f"mask shape {shape} does not match host shape {host.shape}")
        bits = []
        for tok in " ".join(lines[1:]).split():
            v, k = tok.split(":")
            if v not in ("0", "1"):
                raise InvalidParameter(f"bad run value {v!r}")
            bits.append(np.full(int(k), v == "1"))
        return cls(host, np.concatenate(bits) if bits else np.zeros(0, dtype=bool))


def scale_grid(host: CoveringHost, rho_max: float) -> np.ndarray:
    """rho_k = rho_max 2^(-k/4), k >= 1, at least MIN_SCALES of them and down past one lattice cell."""
    out = []
    k = 1
    while True:
        rho = rho_max * SCALE_RATIO ** k
        out.append(rho)
        small = ball_volume(host.dim, rho) * host.sigma * rho ** (2.0 * host.s) < host.cell
        if len(out) >= MIN_SCALES and small:
            return np.array(out)
        k += 1


def _pair_geometry(host: CoveringHost) -> tuple[np.ndarray, np.ndarray]:
    x, t = host.points
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    lag = t[:, None] - t[None, :]                # t_X - tau_Y
    return dist, lag


def sub_cylinder_members(dist: np.ndarray, lag: np.ndarray, radius: float, sigma: float, s: float) -> np.ndarray:
    """Row X: members Y with |x - y| < radius and t - sigma radius^(2s) < tau <= t."""
    depth = sigma * radius ** (2.0 * s)
    return (dist < radius * (1.0 - _SLACK)) & (lag >= -_SLACK * depth) & (lag < depth * (1.0 - _SLACK))


@lru_cache(maxsize=8)
def _memberships(host: CoveringHost, rho_max: float) -> tuple[np.ndarray, list]:
    scales = scale_grid(host, rho_max)
    dist, lag = _pair_geometry(host)
    return scales, [sub_cylinder_members(dist, lag, 3.0 * rho, host.sigma, host.s).astype(float)
                    for rho in scales]


def dilate_set(E: ParabolicPointSet, gamma: float, rho_max: float | None = None) -> ParabolicPointSet:
    """Union of Q+_{3 rho}(X) over lattice centers X and scales rho whose enlarged cylinder is gamma-dense in E."""
    if not 0 < gamma < 1:
        raise InvalidParameter("gamma must lie in (0, 1)")
    host = E.host
    rho_max = host.r if rho_max is None else float(rho_max)
    if not rho_max > 0:
        raise InvalidParameter("rho_max must be positive")
    scales, members = _memberships(host, rho_max)
    e = E.mask.astype(float)
    out = np.zeros(host.size, dtype=bool)
    for rho, member in zip(scales, members):
        counts = np.rint(member @ e)             # exact: small integers in floating point
        target = gamma * ball_volume(host.dim, rho) * host.sigma * rho ** (2.0 * host.s)
        hits = counts * host.cell > target
        if np.any(hits):
            out |= (hits.astype(float) @ member) > 0
    meta = {"lhs_measure": "lattice count", "rhs_measure": "analytic |B_rho| sigma rho^(2s)",
            "scales": len(scales), "rho_max": rho_max, "gamma": gamma}
    return ParabolicPointSet(host, out, meta)


@dataclass
class DichotomyReport:
    gamma: float
    measure: float
    dilated_measure: float
    host_measure: float
    growth_factor: float
    tolerance: float
    growth_branch: bool
    full_branch: bool

    @property
    def holds(self) -> bool:
        return self.growth_branch or self.full_branch

    def to_dict(self) -> dict:
        return {**self.__dict__, "holds": self.holds}


def covering_dichotomy(E: ParabolicPointSet, gamma: float, rho_max: float | None = None,
                       raise_on_failure: bool = True) -> DichotomyReport:
    """Either |E_dilated| >= 2^(-(n+2s))/gamma |E|, or E_dilated is the whole host (one cell per face slack)."""
    host = E.host
    D = dilate_set(E, gamma, rho_max)
    factor = 2.0 ** (-(host.dim + 2.0 * host.s)) / gamma
    tol = (2 * host.dim + 2) * host.cell
    rep = DichotomyReport(gamma, E.measure, D.measure, host.measure, factor, tol,
                          D.measure >= factor * E.measure - tol,
                          host.measure - D.measure <= tol)
    if raise_on_failure and not rep.holds:
        raise DichotomyViolation(f"covering dichotomy fails: |E|={rep.measure:.6g}, "
                                 f"|dilated|={rep.dilated_measure:.6g}, host={rep.host_measure:.6g}")
    return rep
