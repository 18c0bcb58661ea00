"""Time stepping for L u + du/dt = f with exterior data: modal Galerkin and monotone implicit Euler."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from .errors import (IncompatibleFields, IncompleteBoundary, InconsistentData, InvalidParameter,
                     SolverError)
from .lattice import Grid
from .nonlocal_op import FarRule, OperatorMatrix, SpaceTimeField, apply_Lk
from .spectral import SpectralBasis

Data = None | Callable | np.ndarray | float


def sample_forcing(f: Data, grid: Grid, times: np.ndarray) -> np.ndarray:
    """Interior samples of f at every time node, shape (M+1, N)."""
    shape = (len(times), grid.n_interior)
    if f is None:
        return np.zeros(shape)
    if callable(f):
        x = grid.interior_nodes
        return np.array([np.asarray(f(x, t), dtype=float).reshape(len(x)) for t in times])
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape == (grid.n_interior,):
        return np.tile(arr, (len(times), 1))
    if arr.shape != shape:
        raise IncompatibleFields(f"forcing has shape {arr.shape}, expected {shape}")
    return arr


def sample_initial(h: Data, grid: Grid) -> np.ndarray:
    if h is None:
        return np.zeros(grid.n_interior)
    if callable(h):
        return np.asarray(h(grid.interior_nodes), dtype=float).reshape(grid.n_interior)
    arr = np.asarray(h, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n_interior, float(arr))
    if arr.shape != (grid.n_interior,):
        raise IncompatibleFields(f"initial data has shape {arr.shape}, expected ({grid.n_interior},)")
    return arr


def exterior_field(g, grid: Grid, times: np.ndarray) -> SpaceTimeField:
    """Exterior data as a field: a callable g(x, t), a constant, or a field carrying collar samples."""
    if isinstance(g, SpaceTimeField):
        if g.grid is not grid or len(g.times) != len(times):
            raise IncompatibleFields("exterior data lives on another grid or time grid")
        if g.far is None:
            raise IncompleteBoundary("exterior data has no rule beyond the collar")
        return g
    if g is None:
        return SpaceTimeField.zeros(grid, times)
    if callable(g):
        return SpaceTimeField.from_function(grid, times, g)
    c = float(g)
    M = len(times)
    return SpaceTimeField(grid, np.asarray(times, dtype=float), np.full((M, grid.n_interior), c),
                          np.full((M, grid.n_collar), c), FarRule.constant(c))


@dataclass(frozen=True, eq=False)
class GalerkinCoefficients:
    times: np.ndarray
    coefficients: np.ndarray    # (M+1, k)
    forcing: np.ndarray         # (M+1, k) projected forcing samples
    eigenvalues: np.ndarray

    @property
    def count(self) -> int:
        return self.coefficients.shape[1]

    def derivative(self) -> np.ndarray:
        # f is constant on (t_{m-1}, t_m] with value f(t_m)
        return self.forcing - self.eigenvalues * self.coefficients

    def second_derivative(self) -> np.ndarray:
        return -self.eigenvalues * self.derivative()


def galerkin_coefficients(basis: SpectralBasis, f: Data, h_init: Data, times) -> GalerkinCoefficients:
    times = np.asarray(times, dtype=float)
    grid = basis.op.grid
    if np.any(np.diff(times) <= 0):
        raise InvalidParameter("time nodes must increase")
    F = basis.project(sample_forcing(f, grid, times))
    alpha = basis.eigenvalues
    c = np.empty((len(times), basis.count))
    c[0] = basis.project(sample_initial(h_init, grid))
    for m in range(len(times) - 1):
        dt = times[m + 1] - times[m]
        decay = np.exp(-alpha * dt)
        gain = -np.expm1(-alpha * dt) / alpha
        c[m + 1] = decay * c[m] + gain * F[m + 1]
    return GalerkinCoefficients(times, c, F, alpha)


def galerkin_solve(basis: SpectralBasis, f: Data, h_init: Data, times) -> SpaceTimeField:
    """u = sum_i c_i(t) e_i with c_i' = -alpha_i c_i + <f, e_i>, integrated exactly per step."""
    coef = galerkin_coefficients(basis, f, h_init, times)
    grid = basis.op.grid
    u = basis.synthesize(coef.coefficients)
    dudt = basis.synthesize(coef.derivative())
    M = len(coef.times)
    return SpaceTimeField(grid, coef.times, u, np.zeros((M, grid.n_collar)), FarRule.zero(), dudt,
                          meta={"scheme": "galerkin", "modes": basis.count, "coefficients": coef})


def time_derivative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Backward differences (forward at the first node)."""
    d = np.empty_like(values)
    d[1:] = np.diff(values, axis=0) / np.diff(times)[:, None]
    d[0] = d[1] if len(times) > 1 else 0.0
    return d


def lift_and_solve(g, f: Data, h_init: Data, basis: SpectralBasis, times) -> SpaceTimeField:
    """Solve for v = u - g with zero exterior data by the Galerkin scheme and return u = v + g."""
    times = np.asarray(times, dtype=float)
    op = basis.op
    grid = op.grid
    G = exterior_field(g, grid, times)
    Gt = time_derivative(G.interior, times)
    LG = np.array([apply_Lk(op, G, m) for m in range(len(times))])
    F = sample_forcing(f, grid, times) - LG - Gt
    v0 = sample_initial(h_init, grid) - G.interior[0]
    v = galerkin_solve(basis, F, v0, times)
    return SpaceTimeField(grid, times, v.interior + G.interior, G.collar.copy(), G.far,
                          v.dudt + Gt, meta={"scheme": "galerkin-lift", "modes": basis.count,
                                             "coefficients": v.meta["coefficients"]})


def _propagator(op: OperatorMatrix, dt: float) -> np.ndarray:
    """Entrywise nonnegative inverse of I/dt + A (an M-matrix)."""
    N = op.grid.n_interior
    try:
        P = linalg.inv(op.A + np.eye(N) / dt)
    except linalg.LinAlgError as exc:
        raise SolverError(f"implicit step matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(P)):
        raise SolverError("implicit step matrix inverse is not finite")
    # the exact inverse is nonnegative; clip rounding-level negatives so order is kept exactly
    tiny = np.min(P)
    if tiny < -1e-10 * np.max(P):
        raise SolverError("implicit step matrix is not an M-matrix")
    return np.maximum(P, 0.0)


def monotone_solve(op: OperatorMatrix, g, f: Data, h_init: Data, times) -> SpaceTimeField:
    """Implicit Euler (I/dt + A) u^{m+1} = u^m/dt - B g^{m+1} - far^{m+1} + f^{m+1}."""
    times = np.asarray(times, dtype=float)
    grid = op.grid
    steps = np.diff(times)
    if len(steps) == 0 or np.any(steps <= 0):
        raise InvalidParameter("need increasing time nodes")
    dt = float(steps[0])
    if np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise InvalidParameter("monotone scheme needs uniform time steps")
    G = exterior_field(g, grid, times)
    F = sample_forcing(f, grid, times)
    P = _propagator(op, dt)
    pull = -op.B  # entrywise >= 0
    u = np.empty((len(times), grid.n_interior))
    u[0] = sample_initial(h_init, grid)
    for m in range(len(times) - 1):
        t = float(times[m + 1])
        inflow = -op.far_forcing(G.far, t)
        rhs = u[m] / dt + pull @ G.collar[m + 1] + inflow + F[m + 1]
        u[m + 1] = P @ rhs
    if not np.all(np.isfinite(u)):
        raise SolverError("monotone scheme produced non-finite values")
    return SpaceTimeField(grid, times, u, G.collar.copy(), G.far,
                          meta={"scheme": "monotone", "dt": dt})


def _test_matrix(test_set, grid: Grid) -> np.ndarray:
    if isinstance(test_set, SpectralBasis):
        return test_set.vectors
    phi = np.asarray(test_set, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    if phi.shape[0] != grid.n_interior:
        raise IncompatibleFields("test functions must be given on interior nodes")
    return phi


def hat_functions(grid: Grid, nodes=None) -> np.ndarray:
    """Nodal hat (indicator) test vectors at the given interior node numbers."""
    nodes = np.arange(grid.n_interior) if nodes is None else np.asarray(nodes)
    phi = np.zeros((grid.n_interior, len(nodes)))
    phi[nodes, np.arange(len(nodes))] = 1.0
    return phi


def weak_residual(op: OperatorMatrix, field: SpaceTimeField, f: Data, test_set) -> dict:
    """<u(t), phi>_K + <u'(t) - f(t), phi> for each time node and test vector."""
    grid = op.grid
    if field.grid is not grid:
        raise IncompatibleFields("field and operator live on different grids")
    phi = _test_matrix(test_set, grid)
    times = field.times
    if field.dudt is not None:
        du = field.dudt
    elif len(times) > 1:
        du = np.gradient(field.interior, times, axis=0)
    else:
        du = np.zeros_like(field.interior)
    F = sample_forcing(f, grid, times)
    Lu = np.array([apply_Lk(op, field, m) for m in range(len(times))])
    res = grid.cell * (Lu + du - F) @ phi
    return {
        "max": float(np.max(np.abs(res))),
        "rms": float(np.sqrt(np.mean(res ** 2))),
        "per_time": np.max(np.abs(res), axis=1),
        "values": res,
    }


def energy_report(op: OperatorMatrix, field: SpaceTimeField, f: Data, h_init: Data) -> dict:
    """Energy norms of the solution against the size of the data (zero exterior data)."""
    grid = op.grid
    if np.any(field.collar != 0) or (field.far is not None and field.far.kind != "zero"):
        raise InvalidParameter("energy report needs zero exterior data")
    times = field.times
    cell = grid.cell
    u = field.interior
    if field.dudt is not None:
        du = field.dudt
    elif len(times) > 1:
        du = np.gradient(u, times, axis=0)
    else:
        du = np.zeros_like(u)
    F = sample_forcing(f, grid, times)
    h = sample_initial(h_init, grid)
    chol = linalg.cho_factor(op.A)
    l2 = np.sqrt(cell * np.sum(u * u, axis=1))
    x0_sq = cell * np.einsum("mi,ij,mj->m", u, op.A, u)
    dual_sq = cell * np.einsum("mi,mi->m", du, linalg.cho_solve(chol, du.T).T)
    f_sq = cell * np.sum(F * F, axis=1)

    def integral(v):
        return float(integrate.trapezoid(v, times)) if len(times) > 1 else 0.0

    sup_l2 = float(np.max(l2))
    x0 = math.sqrt(max(integral(x0_sq), 0.0))
    dual = math.sqrt(max(integral(dual_sq), 0.0))
    lhs = sup_l2 + x0 + dual
    rhs = math.sqrt(max(integral(f_sq), 0.0)) + math.sqrt(cell * float(h @ h))
    if rhs == 0.0:
        if lhs > 0.0:
            raise InconsistentData("zero data produced a nonzero field")
        ratio = 0.0
    else:
        ratio = lhs / rhs
    return {"sup_l2": sup_l2, "l2_x0": x0, "l2_dual": dual, "lhs": lhs, "rhs": rhs, "ratio": ratio}


def write_field_csv(field: SpaceTimeField, path, include_collar: bool = False) -> None:
    g = field.grid
    pts = g.all_nodes if include_collar else g.interior_nodes
    vals = field.all_values() if include_collar else field.interior
    coords = ["x", "y"][: g.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(coords + ["t", "value"])
        for m, t in enumerate(field.times):
            for p, v in zip(pts, vals[m]):
                w.writerow([repr(float(c)) for c in p] + [repr(float(t)), repr(float(v))])


_MAGIC = b"NLHF"


def write_field_binary(field: SpaceTimeField, path, include_collar: bool = False) -> None:
    """Header: magic, version, dim, node count, time count (uint32 LE); then float64 LE
    coordinates (nodes x dim), times, and values (times x nodes, row-major)."""
    g = field.grid
    pts = g.all_nodes if include_collar else g.interior_nodes
    vals = field.all_values() if include_collar else field.interior
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<4I", 1, g.dim, len(pts), len(field.times)))
        fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(field.times, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def read_field_binary(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coordinates, times, values) from a binary dump."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InvalidParameter(f"{path}: not a field dump")
        _, dim, nodes, steps = struct.unpack("<4I", fh.read(16))
        pts = np.frombuffer(fh.read(8 * nodes * dim), dtype="<f8").reshape(nodes, dim)
        times = np.frombuffer(fh.read(8 * steps), dtype="<f8")
        vals = np.frombuffer(fh.read(8 * steps * nodes), dtype="<f8").reshape(steps, nodes)
    return pts, times, vals
