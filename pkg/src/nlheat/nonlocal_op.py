"""Lattice discretization of the nonlocal operator, its bilinear form, and fractional norms.

The operator acts as

    L u(x) = sum_{0 < |z| <= R_inf} 2 W(z) (u(x) - u(x + z)) + far part,

with W(z) = K(z) h^n, except that the nearest-neighbour weights carry an extra
factor 1 + delta(n, s). The factor removes the leading O(h^(2-2s)) consistency
error of the plain lattice sum (it is the zeta-function term of the lattice
sum's symbol expansion), and it makes the scheme reduce to the standard
second-difference Laplacian as s -> 1. delta > 0, so all off-diagonal entries
stay nonpositive. Offsets beyond R_inf use a radial Gauss-Laguerre rule
applied to the exterior rule of the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Callable

import mpmath
import numpy as np

from .errors import AssemblyError, DomainViolation, IncompatibleFields, IncompleteField, InvalidParameter
from .kernel import SPHERE_MEASURE, Kernel
from .lattice import Grid

FAR_ANGLES_2D = 16


@lru_cache(maxsize=None)
def correction_factor(n: int, s: float) -> float:
    """delta(n, s) added to the nearest-neighbour weights (relative)."""
    if n == 1:
        return float(-mpmath.zeta(2.0 * s - 1.0))
    if n == 2:
        return float(-mpmath.zeta(s) * mpmath.dirichlet(s, [0, 1, 0, -1]))
    raise InvalidParameter(f"unsupported dimension {n}")


@dataclass(frozen=True, eq=False)
class WeightTable:
    offsets: np.ndarray   # (Noff, n) integer offsets, symmetric set
    weights: np.ndarray   # (Noff,)
    h: float
    radius: float         # offsets satisfy |z| h <= radius
    delta: float


def weight_table(kernel: Kernel, h: float, R_inf: float) -> WeightTable:
    n = kernel.dim
    reach = int(math.floor(R_inf / h + 1e-9))
    axis = np.arange(-reach, reach + 1)
    z = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    norm2 = np.sum(z * z, axis=1)
    keep = (norm2 > 0) & (norm2 <= reach * reach)
    z = z[keep]
    dist = np.sqrt(norm2[keep].astype(float))
    w = kernel.radial(dist * h) * h ** n
    delta = correction_factor(n, kernel.s)
    w = np.where(norm2[keep] == 1, w * (1.0 + delta), w)
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise AssemblyError("non-finite or negative quadrature weight")
    return WeightTable(offsets=z, weights=w, h=h, radius=reach * h, delta=delta)


def far_directions(n: int, count: int = FAR_ANGLES_2D) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    ang = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


@dataclass(frozen=True)
class FarRule:
    """Values of a field beyond the collar: zero, a constant c(t), or a function g(x, t)."""

    kind: str = "zero"
    value: float | Callable[[float], float] = 0.0
    func: Callable[[np.ndarray, float], np.ndarray] | None = field(default=None, compare=False)

    @classmethod
    def zero(cls) -> "FarRule":
        return cls("zero")

    @classmethod
    def constant(cls, c) -> "FarRule":
        return cls("constant", value=c)

    @classmethod
    def function(cls, fn) -> "FarRule":
        return cls("function", func=fn)

    def constant_at(self, t: float) -> float:
        return float(self.value(t)) if callable(self.value) else float(self.value)

    def evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(len(points))
        if self.kind == "constant":
            return np.full(len(points), self.constant_at(t))
        return np.asarray(self.func(points, t), dtype=float).reshape(len(points))

    def map(self, op: Callable[[np.ndarray], np.ndarray]) -> "FarRule":
        """Rule for op(u) beyond the collar (op applied pointwise)."""
        if self.kind == "zero":
            v = float(op(np.zeros(1))[0])
            return FarRule.zero() if v == 0.0 else FarRule.constant(v)
        if self.kind == "constant":
            val = self.value
            return FarRule.constant(lambda t: float(op(np.array([val(t) if callable(val) else val]))[0]))
        fn = self.func
        return FarRule.function(lambda x, t: op(np.asarray(fn(x, t), dtype=float)))

    def plus(self, other: "FarRule") -> "FarRule":
        if self.kind == "zero":
            return other
        if other.kind == "zero":
            return self
        if self.kind == "constant" and other.kind == "constant":
            return FarRule.constant(lambda t: self.constant_at(t) + other.constant_at(t))
        return FarRule.function(lambda x, t: self.evaluate(x, t) + other.evaluate(x, t))

    def describe(self) -> dict:
        if self.kind == "constant" and not callable(self.value):
            return {"kind": "constant", "value": float(self.value)}
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples on interior and collar nodes at each time node, plus the rule beyond the collar."""

    grid: Grid
    times: np.ndarray
    interior: np.ndarray
    collar: np.ndarray
    far: FarRule | None = field(default_factory=FarRule.zero)
    dudt: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = len(self.times)
        if self.interior.shape != (M, self.grid.n_interior) or self.collar.shape != (M, self.grid.n_collar):
            raise IncompatibleFields("field arrays do not match grid and time nodes")
        if not (np.all(np.isfinite(self.interior)) and np.all(np.isfinite(self.collar))):
            raise IncompatibleFields("field contains non-finite values")
        for arr in (self.times, self.interior, self.collar, self.dudt):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def steps(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def values(self, m: int) -> np.ndarray:
        return np.concatenate([self.interior[m], self.collar[m]])

    def all_values(self) -> np.ndarray:
        return np.concatenate([self.interior, self.collar], axis=1)

    @classmethod
    def from_function(cls, grid: Grid, times, fn, meta: dict | None = None) -> "SpaceTimeField":
        times = np.asarray(times, dtype=float)
        xi, xc = grid.interior_nodes, grid.collar_nodes
        interior = np.array([np.asarray(fn(xi, t), dtype=float).reshape(len(xi)) for t in times])
        collar = np.array([np.asarray(fn(xc, t), dtype=float).reshape(len(xc)) for t in times])
        return cls(grid, times, interior.reshape(len(times), -1), collar.reshape(len(times), -1),
                   FarRule.function(fn), meta=dict(meta or {}))

    @classmethod
    def zeros(cls, grid: Grid, times) -> "SpaceTimeField":
        times = np.asarray(times, dtype=float)
        return cls(grid, times, np.zeros((len(times), grid.n_interior)),
                   np.zeros((len(times), grid.n_collar)), FarRule.zero())

    @classmethod
    def static(cls, grid: Grid, interior, collar=None, far: FarRule | None = None) -> "SpaceTimeField":
        interior = np.asarray(interior, dtype=float).reshape(1, -1)
        collar = np.zeros((1, grid.n_collar)) if collar is None else np.asarray(collar, dtype=float).reshape(1, -1)
        return cls(grid, np.zeros(1), interior, collar, FarRule.zero() if far is None else far)

    def map(self, op: Callable[[np.ndarray], np.ndarray], tag: str) -> "SpaceTimeField":
        far = None if self.far is None else self.far.map(op)
        return SpaceTimeField(self.grid, self.times, op(self.interior), op(self.collar), far,
                              meta={**self.meta, "transform": tag})

    def positive_part(self) -> "SpaceTimeField":
        return self.map(lambda v: np.maximum(v, 0.0), "positive")

    def negative_part(self) -> "SpaceTimeField":
        return self.map(lambda v: np.maximum(-v, 0.0), "negative")

    def magnitude(self) -> "SpaceTimeField":
        return self.map(np.abs, "abs")

    def scaled(self, c: float) -> "SpaceTimeField":
        dudt = None if self.dudt is None else c * self.dudt
        out = self.map(lambda v: c * v, f"scaled {c:g}")
        return replace(out, dudt=dudt)

    def shifted(self, dt: float) -> "SpaceTimeField":
        """Same samples attached to time nodes shifted by dt (exterior function shifted too)."""
        far = self.far
        if far is not None and far.kind == "function":
            fn = far.func
            far = FarRule.function(lambda x, t: fn(x, t - dt))
        elif far is not None and far.kind == "constant" and callable(far.value):
            val = far.value
            far = FarRule.constant(lambda t: val(t - dt))
        return SpaceTimeField(self.grid, self.times + dt, self.interior.copy(), self.collar.copy(), far,
                              None if self.dudt is None else self.dudt.copy(), dict(self.meta))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """apply_Lk = A u_interior + B u_collar + far_forcing; mass matrix h^n I."""

    grid: Grid
    kernel: Kernel
    A: np.ndarray
    B: np.ndarray
    table: WeightTable
    far_radii: np.ndarray
    far_weights: np.ndarray
    directions: np.ndarray
    R_far: float
    kappa: float
    quadrature: dict

    @property
    def mass(self) -> float:
        return self.grid.cell

    @property
    def M(self) -> np.ndarray:
        return self.grid.cell * np.eye(self.grid.n_interior)

    @property
    def stiffness(self) -> np.ndarray:
        return self.grid.cell * self.A

    @cached_property
    def neighbours(self) -> np.ndarray:
        return neighbour_matrix(self.grid, self.table)

    @cached_property
    def unit_table(self) -> WeightTable:
        """Weights of the kernel |y|^(-n-2s) (used by the X0 and H^s norms)."""
        from .kernel import Kernel as _K
        unit = _K(dim=self.kernel.dim, s=self.kernel.s, lam=1.0, Lam=1.0, coefficient=1.0,
                  profile=lambda r: np.asarray(r, dtype=float) ** (-self.kernel.exponent), name="unit")
        return weight_table(unit, self.grid.h, self.grid.R_inf)

    def shell_values(self, rule: FarRule, centers: np.ndarray, t: float) -> np.ndarray:
        """Averages of the exterior rule over the spheres |y - c| = r_j, shape (len(centers), J)."""
        if rule.kind == "zero":
            return np.zeros((len(centers), len(self.far_radii)))
        if rule.kind == "constant":
            return np.full((len(centers), len(self.far_radii)), rule.constant_at(t))
        pts = (centers[:, None, None, :]
               + self.far_radii[None, :, None, None] * self.directions[None, None, :, :])
        vals = rule.evaluate(pts.reshape(-1, self.grid.dim), t)
        return vals.reshape(len(centers), len(self.far_radii), len(self.directions)).mean(axis=2)

    def far_forcing(self, rule: FarRule | None, t: float) -> np.ndarray:
        """Contribution -2 int_{|y|>R_far} g(x+y) K(y) dy at interior nodes."""
        if rule is None:
            raise IncompleteField("field has no exterior rule beyond the collar")
        if rule.kind == "zero":
            return np.zeros(self.grid.n_interior)
        if rule.kind == "constant":
            return np.full(self.grid.n_interior, -2.0 * self.kappa * rule.constant_at(t))
        return -2.0 * self.shell_values(rule, self.grid.interior_nodes, t) @ self.far_weights

    def apply(self, u_int: np.ndarray, u_col: np.ndarray, rule: FarRule | None, t: float) -> np.ndarray:
        return self.A @ u_int + self.B @ u_col + self.far_forcing(rule, t)


def neighbour_matrix(grid: Grid, table: WeightTable) -> np.ndarray:
    nb = grid.lookup(grid.interior_index[:, None, :] + table.offsets[None, :, :])
    if np.any(nb < 0):
        raise AssemblyError("offset table reaches beyond the collar")
    return nb


def assemble(grid: Grid, kernel: Kernel, far_order: int | None = None) -> OperatorMatrix:
    if kernel.dim != grid.dim:
        raise InvalidParameter("kernel and grid dimensions differ")
    table = weight_table(kernel, grid.h, grid.R_inf)
    N, Nc = grid.n_interior, grid.n_collar
    nb = neighbour_matrix(grid, table)
    R_far = table.radius + 0.5 * grid.h
    radii, fw = kernel.far_quadrature(R_far) if far_order is None else kernel.far_quadrature(R_far, far_order)
    if not (np.all(np.isfinite(fw)) and np.all(np.isfinite(table.weights))):
        raise AssemblyError("non-finite quadrature weight")
    kappa = float(np.sum(fw))
    A = np.zeros((N, N))
    B = np.zeros((N, Nc))
    rows = np.repeat(np.arange(N), len(table.weights))
    cols = nb.ravel()
    vals = -2.0 * np.tile(table.weights, N)
    inner = cols < N
    A[rows[inner], cols[inner]] = vals[inner]
    B[rows[~inner], cols[~inner] - N] = vals[~inner]
    diag = 2.0 * float(np.sum(table.weights)) + 2.0 * kappa
    A[np.arange(N), np.arange(N)] = diag
    quad = {
        "h_split": grid.h,
        "lattice_radius": table.radius,
        "far_radius": R_far,
        "far_nodes": len(radii),
        "far_directions": len(far_directions(grid.dim)),
        "nearest_neighbour_correction": table.delta,
        "offsets": len(table.weights),
        "far_mass": kappa,
    }
    return OperatorMatrix(grid, kernel, A, B, table, radii, fw, far_directions(grid.dim),
                          R_far, kappa, quad)


def apply_Lk(op: OperatorMatrix, field: SpaceTimeField, m: int) -> np.ndarray:
    if field.grid is not op.grid:
        raise IncompatibleFields("field and operator live on different grids")
    return op.apply(field.interior[m], field.collar[m], field.far, float(field.times[m]))


def _pair_sum(op: OperatorMatrix, table: WeightTable, nb: np.ndarray, u: np.ndarray, v: np.ndarray
              ) -> tuple[float, float]:
    """sum over interior x and offsets z of W(z)(u(x)-u(x+z))(v(x)-v(x+z)), split by x+z in/out of Omega."""
    N = op.grid.n_interior
    du = u[:N, None] - u[nb]
    dv = v[:N, None] - v[nb]
    prod = table.weights[None, :] * du * dv
    inner = nb < N
    return float(np.sum(prod[inner])), float(np.sum(prod[~inner]))


def _far_pair_sum(op: OperatorMatrix, u_far: FarRule, v_far: FarRule, u_int, v_int, t, weights) -> float:
    if u_far is None or v_far is None:
        raise IncompleteField("field has no exterior rule beyond the collar")
    pts = op.grid.interior_nodes
    if u_far.kind == "function" or v_far.kind == "function":
        P = (pts[:, None, None, :] + op.far_radii[None, :, None, None] * op.directions[None, None, :, :])
        flat = P.reshape(-1, op.grid.dim)
        shape = (len(pts), len(op.far_radii), len(op.directions))
        U = u_far.evaluate(flat, t).reshape(shape)
        V = v_far.evaluate(flat, t).reshape(shape)
        prod = ((u_int[:, None, None] - U) * (v_int[:, None, None] - V)).mean(axis=2)
    else:
        uc, vc = u_far.constant_at(t), v_far.constant_at(t)
        prod = np.repeat(((u_int - uc) * (v_int - vc))[:, None], len(op.far_radii), axis=1)
    return float(np.sum(prod @ weights))


def bilinear_form(op: OperatorMatrix, u: SpaceTimeField, v: SpaceTimeField, m: int = 0) -> float:
    """<u, v>_K over pairs with at least one point in Omega (collar-collar pairs excluded)."""
    if u.grid is not op.grid or v.grid is not op.grid:
        raise IncompatibleFields("fields and operator live on different grids")
    if u.steps != v.steps:
        raise IncompatibleFields("fields have different time nodes")
    uu, vv = u.values(m), v.values(m)
    s_in, s_out = _pair_sum(op, op.table, op.neighbours, uu, vv)
    # far kernel mass per unit solid angle comes from the operator's radial rule
    far = _far_pair_sum(op, u.far, v.far, u.interior[m], v.interior[m], float(u.times[m]), op.far_weights)
    return op.grid.cell * (s_in + 2.0 * s_out + 2.0 * far)


def _unit_far_weights(op: OperatorMatrix) -> np.ndarray:
    # |y|^(-n-2s) shell weights at the operator's far radii
    e = op.kernel.exponent
    shape = op.kernel.radial(op.far_radii) * op.far_radii ** e
    return op.far_weights / shape


def x0_norm(op: OperatorMatrix, field: SpaceTimeField, m: int = 0) -> float:
    """(iint_{pairs touching Omega} |v(x)-v(y)|^2 |x-y|^(-n-2s))^(1/2) for v vanishing outside Omega."""
    if np.any(field.collar[m] != 0) or field.far is None or field.far.kind != "zero":
        raise DomainViolation("x0_norm needs a field that vanishes outside the domain")
    v = field.values(m)
    nb = op.neighbours
    s_in, s_out = _pair_sum(op, op.unit_table, nb, v, v)
    far = float(np.sum(field.interior[m] ** 2) * np.sum(_unit_far_weights(op)))
    return math.sqrt(max(op.grid.cell * (s_in + 2.0 * s_out + 2.0 * far), 0.0))


def hs_seminorm(op: OperatorMatrix, field: SpaceTimeField, region: np.ndarray | None = None, m: int = 0) -> float:
    """Gagliardo seminorm over region x region; region is a mask over interior nodes (default: all)."""
    N = op.grid.n_interior
    mask = np.ones(N, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    v = field.values(m)
    nb = op.neighbours
    du = v[:N, None] - v[nb]
    inside = (nb < N) & mask[:, None]
    inside[inside] = mask[nb[inside]]
    total = np.sum(op.unit_table.weights[None, :] * du * du * inside)
    return math.sqrt(op.grid.cell * float(total))


def gagliardo_energy(op: OperatorMatrix, field: SpaceTimeField, m: int = 0) -> float:
    """Energy with the reference kernel (1-s)|y|^(-n-2s), for the ellipticity sandwich."""
    return (1.0 - op.kernel.s) * x0_norm(op, field, m) ** 2


def subgrid_error_estimate(op: OperatorMatrix, field: SpaceTimeField, m: int = 0) -> dict:
    """Bound for the dropped ball |y| < h: int_{|y|<h} |y|^2 K dy times the max second difference."""
    k, n, h = op.kernel, op.grid.dim, op.grid.h
    if k.coefficient is not None:
        moment = k.coefficient * SPHERE_MEASURE[n] * h ** (2.0 - 2.0 * k.s) / (2.0 - 2.0 * k.s)
    else:
        from scipy import integrate
        moment = SPHERE_MEASURE[n] * integrate.quad(lambda r: float(k.radial(r)) * r ** (n + 1), 0.0, h)[0]
    u = field.values(m)
    g = op.grid
    worst = 0.0
    for axis in range(n):
        e = np.zeros(n, dtype=np.int64)
        e[axis] = 1
        plus = g.lookup(g.interior_index + e)
        minus = g.lookup(g.interior_index - e)
        d2 = (u[plus] - 2.0 * u[:g.n_interior] + u[minus]) / h ** 2
        worst = max(worst, float(np.max(np.abs(d2))))
    return {"moment": moment, "second_derivative_max": worst, "bound": moment * worst}


def periodic_apply(kernel: Kernel, u: np.ndarray, h: float, R_inf: float) -> np.ndarray:
    """Operator on a 1D periodic lattice (u sampled at N points of a period N*h)."""
    if kernel.dim != 1:
        raise InvalidParameter("periodic test lattice is one-dimensional")
    u = np.asarray(u, dtype=float)
    N = len(u)
    table = weight_table(kernel, h, R_inf)
    folded = np.zeros(N)
    np.add.at(folded, table.offsets[:, 0] % N, table.weights)
    conv = np.fft.irfft(np.fft.rfft(u) * np.fft.rfft(folded), n=N)
    kappa = kernel.far_integral(table.radius + 0.5 * h)
    return 2.0 * np.sum(table.weights) * u - 2.0 * conv + 2.0 * kappa * (u - u.mean())
