"""Numerical checks of the order principles, Caccioppoli, boundedness, and Harnack-type inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateGrid, HypothesisNotMet, InvalidParameter, OutOfDomain
from .evolution import exterior_field, monotone_solve, sample_forcing, sample_initial
from .lattice import DEFAULT_SIGMA, Cylinder, make_cylinder
from .nonlocal_op import FarRule, OperatorMatrix, SpaceTimeField
from .tail import parabolic_tail

DEFAULT_TOLERANCE = 0.1
BOUND_TOLERANCE = 0.02
DELTAS = (0.25, 0.5, 1.0)
POWERS = (0.25, 0.5, 0.75)
WEAK_HARNACK_TAIL = 4.0 / 3.0


def _json_float(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


@dataclass
class AuditResult:
    """Outcome of one inequality check: lhs <= constant * sum(rhs_terms) * (1 + tolerance)."""

    check_id: str
    lhs: float
    rhs_terms: list
    constant: float = 1.0
    tolerance: float = 0.0
    empirical_constant: float = 0.0
    passed: bool = False
    skipped: bool = False
    degenerate: bool = False
    reason: str = ""
    params: dict = field(default_factory=dict)
    cylinders: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    members: dict = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return self.constant * float(sum(v for _, v in self.rhs_terms))

    @property
    def margin(self) -> float:
        """Relative violation max(0, lhs/rhs - 1); 0 when the check holds without slack."""
        if self.skipped or self.lhs <= self.rhs:
            return 0.0
        return math.inf if self.rhs <= 0 else self.lhs / self.rhs - 1.0

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "params": self.params,
            "lhs": _json_float(self.lhs),
            "rhs": _json_float(self.rhs),
            "rhs_terms": [{"name": k, "value": _json_float(v)} for k, v in self.rhs_terms],
            "constant": _json_float(self.constant),
            "empirical_constant": _json_float(self.empirical_constant),
            "pass": bool(self.passed),
            "skipped": bool(self.skipped),
            "degenerate": bool(self.degenerate),
            "reason": self.reason,
            "tolerance": self.tolerance,
            "cylinders": self.cylinders,
            "members": self.members,
            "provenance": self.provenance,
        }


def smallest_constant(lhs: float, rhs: float) -> float:
    if lhs <= 0:
        return 0.0
    if rhs <= 0:
        return math.inf
    return lhs / rhs


def _checked(check_id: str, lhs: float, terms: list, tol: float, **extra) -> AuditResult:
    res = AuditResult(check_id, float(lhs), [(k, float(v)) for k, v in terms], tolerance=tol, **extra)
    res.empirical_constant = smallest_constant(res.lhs, res.rhs)
    res.passed = res.lhs <= res.rhs * (1.0 + tol)
    return res


def _empirical(check_id: str, lhs: float, terms: list, **extra) -> AuditResult:
    """Check with an unspecified constant: report the smallest one that works; pass if finite."""
    res = AuditResult(check_id, float(lhs), [(k, float(v)) for k, v in terms], **extra)
    base = float(sum(v for _, v in res.rhs_terms))
    if res.lhs > 0 and base <= 0:
        # strict positivity is not exactly inherited by lattices; floor and flag
        floor = np.finfo(float).eps * max(1.0, abs(res.lhs))
        res.rhs_terms = res.rhs_terms + [("floor", floor)]
        res.degenerate = True
        base = floor
    c = smallest_constant(res.lhs, base)
    res.empirical_constant = c
    res.constant = max(c, 0.0)
    res.passed = math.isfinite(c)
    return res


def _skipped(check_id: str, reason: str, **extra) -> AuditResult:
    return AuditResult(check_id, 0.0, [], skipped=True, passed=True, reason=reason, **extra)


def provenance(field: SpaceTimeField, op: OperatorMatrix | None = None) -> dict:
    g = field.grid
    out = {"scheme": field.meta.get("scheme", "unknown"), "dim": g.dim, "h": g.h, "R_inf": g.R_inf,
           "dt": field.dt, "time_nodes": field.steps}
    if op is not None:
        out.update({"s": op.kernel.s, "kernel": op.kernel.name})
    return out


# ----------------------------------------------------------------- order principles

@dataclass(eq=False)
class OrderScenario:
    """Data for the monotone scheme; the optional second data set should dominate the first."""

    op: OperatorMatrix
    times: np.ndarray
    g: object = None
    f: object = None
    h: object = None
    g2: object = None
    f2: object = None
    h2: object = None
    bound_tolerance: float = BOUND_TOLERANCE


def _exterior_samples(op: OperatorMatrix, G: SpaceTimeField) -> np.ndarray:
    """Collar samples plus exterior-rule samples on the far shells, all time nodes."""
    far = [op.shell_values(G.far, op.grid.interior_nodes, float(t)).ravel() for t in G.times]
    return np.concatenate([G.collar.ravel(), np.concatenate(far)])


def _data_arrays(sc: OrderScenario, g, f, h):
    G = exterior_field(g, sc.op.grid, sc.times)
    F = sample_forcing(f, sc.op.grid, sc.times)
    H = sample_initial(h, sc.op.grid) if h is not None else G.interior[0].copy()
    return G, F, H


def audit_order_principles(sc: OrderScenario) -> list[AuditResult]:
    op, times = sc.op, np.asarray(sc.times, dtype=float)
    G, F, H = _data_arrays(sc, sc.g, sc.f, sc.h)
    u = monotone_solve(op, G, F, H, times)
    prov = provenance(u, op)
    ext = _exterior_samples(op, G)
    results = []

    # (i) sign: g <= 0, h <= 0, f <= 0 forces u <= 0
    if np.all(ext <= 0) and np.all(H <= 0) and np.all(F <= 0):
        results.append(_checked("order.sign", float(np.max(u.interior)), [("zero", 0.0)], 0.0,
                                provenance=prov, params={"nodes": u.interior.size}))
    else:
        results.append(_skipped("order.sign", "hypothesis-not-met: data not all nonpositive", provenance=prov))

    # (ii) comparison with a dominating data set
    if sc.g2 is None and sc.f2 is None and sc.h2 is None:
        results.append(_skipped("order.comparison", "hypothesis-not-met: no second data set", provenance=prov))
    else:
        G2, F2, H2 = _data_arrays(sc, sc.g2, sc.f2, sc.h2)
        ext2 = _exterior_samples(op, G2)
        if np.all(ext <= ext2) and np.all(H <= H2) and np.all(F <= F2):
            v = monotone_solve(op, G2, F2, H2, times)
            results.append(_checked("order.comparison", float(np.max(u.interior - v.interior)),
                                    [("zero", 0.0)], 0.0, provenance=prov))
        else:
            results.append(_skipped("order.comparison", "hypothesis-not-met: data sets are not ordered",
                                    provenance=prov))

    # (iii) sup |u| <= 2 sup |g| when f = 0 and h = g(-T)
    if np.all(F == 0) and np.allclose(H, G.interior[0], rtol=0, atol=1e-14):
        sup_g = float(max(np.max(np.abs(G.interior)), np.max(np.abs(ext))))
        results.append(_checked("order.linf_bound", float(np.max(np.abs(u.interior))),
                                [("twice_sup_g", 2.0 * sup_g)], sc.bound_tolerance, provenance=prov))
    else:
        results.append(_skipped("order.linf_bound", "hypothesis-not-met: needs f = 0 and h = g(-T)",
                                provenance=prov))
    return results


# ----------------------------------------------------------------- cylinders and cutoffs

def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _smooth_step_slope(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    S = _smooth_step(u)
    inner = (u > 0) & (u < 1)
    uu = np.where(inner, u, 0.5)
    return np.where(inner, S * (1.0 - S) * (1.0 / uu ** 2 + 1.0 / (1.0 - uu) ** 2), 0.0)


def space_cutoff(center, r: float) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth zeta: 1 on B_{r/2}, 0 outside B_{3r/4} (support kept off the sphere so the tail sup is finite)."""
    c = np.asarray(center, dtype=float)
    return lambda x: _smooth_step(4.0 * (0.75 - np.linalg.norm(np.atleast_2d(x) - c, axis=1) / r))


def time_cutoff(start: float, rise: float) -> tuple[Callable, Callable]:
    """Smooth eta rising from 0 at `start` to 1 at `start + rise`, and its derivative."""
    eta = lambda t: _smooth_step((np.asarray(t, dtype=float) - start) / rise)
    deta = lambda t: _smooth_step_slope((np.asarray(t, dtype=float) - start) / rise) / rise
    return eta, deta


def _require_inside(field: SpaceTimeField, center, r: float, sigma: float, s: float, t0: float) -> Cylinder:
    times = field.times
    cyl = make_cylinder(field.grid, center, r, "standard", sigma, s, t0=t0)
    a, b = cyl.interval
    slack = 1e-10 * max(1.0, abs(a), abs(b))
    if a < times[0] - slack or b > times[-1] + slack:
        raise OutOfDomain(f"time interval ({a:.6g}, {b:.6g}] leaves the field's time range")
    return cyl


def _member_values(field: SpaceTimeField, cyl: Cylinder) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nodes, steps = cyl.members(field.grid, field.times)
    if nodes.size == 0 or steps.size == 0:
        raise DegenerateGrid(f"{cyl.kind} cylinder of radius {cyl.r} has no lattice members; refine the mesh")
    return field.interior[np.ix_(steps, nodes)], nodes, steps


def _cyl_info(cyl: Cylinder, nodes, steps) -> dict:
    return {**cyl.describe(), "nodes": int(len(nodes)), "steps": int(len(steps))}


# ----------------------------------------------------------------- Caccioppoli

def audit_caccioppoli(op: OperatorMatrix, field: SpaceTimeField, center, r: float, level: float,
                      sign: str = "+", t0: float = 0.0, sigma: float = DEFAULT_SIGMA,
                      zeta: Callable | None = None, eta: tuple[Callable, Callable] | None = None,
                      tolerance: float = DEFAULT_TOLERANCE) -> AuditResult:
    """Energy of w = (u - M)_+ (sign '+') or (M - u)_+ (sign '-') on Q_r against cutoff and tail terms."""
    if sign not in "+-" or len(sign) != 1:
        raise InvalidParameter("sign must be '+' or '-'")
    s = op.kernel.s
    grid = op.grid
    _require_inside(field, center, 2.0 * r, sigma, s, t0)
    cyl = make_cylinder(grid, center, r, "standard", sigma, s, t0=t0)
    nodes, steps = cyl.members(grid, field.times)
    if nodes.size == 0 or steps.size == 0:
        raise DegenerateGrid("Caccioppoli cylinder has no lattice members; refine the mesh")
    a, _ = cyl.interval
    zeta = zeta or space_cutoff(center, r)
    eta, deta = eta or time_cutoff(a, 0.5 * r ** (2.0 * s))
    z = np.asarray(zeta(grid.interior_nodes), dtype=float)
    z[~cyl.space_mask(grid.interior_nodes)] = 0.0
    if sign == "+":
        wfield = field.map(lambda v: np.maximum(v - level, 0.0), "w+")
    else:
        wfield = field.map(lambda v: np.maximum(level - v, 0.0), "w-")
    N = grid.n_interior
    nb = op.neighbours
    W = op.table.weights
    inball = np.zeros(grid.n_interior + grid.n_collar, dtype=bool)
    inball[nodes] = True
    ball_rows = nodes
    pair_in = inball[nb[ball_rows]]            # (|B|, Noff): neighbour also in the ball
    support = ball_rows[z[ball_rows] > 0]
    sup_rows = np.searchsorted(ball_rows, support)
    cell, dt = grid.cell, field.dt
    tt = field.times[steps]
    et, det = eta(tt), deta(tt)

    Z, E, X, wz2, reach = [], [], [], [], []
    for m in steps:
        w = wfield.values(m)
        wi = w[ball_rows]
        wj = w[nb[ball_rows]]
        zi = z[ball_rows][:, None]
        zj = np.where(pair_in, np.concatenate([z, np.zeros(grid.n_collar)])[nb[ball_rows]], 0.0)
        Z.append(cell * float(np.sum((wi * z[ball_rows]) ** 2)))
        E.append(cell * float(np.sum(W * pair_in * (zi * wi[:, None] - zj * wj) ** 2)))
        X.append(cell * float(np.sum(W * pair_in * np.maximum(wi[:, None], wj) ** 2 * (zi - zj) ** 2)))
        wz2.append(cell * float(np.sum(wi * z[ball_rows] ** 2)))
        # int_{outside B_r} w(y) K(x - y) dy for x in supp zeta
        outside = np.sum(W * (~pair_in[sup_rows]) * wj[sup_rows], axis=1)
        far = op.shell_values(wfield.far, grid.interior_nodes[support], float(field.times[m])) @ op.far_weights
        reach.append(float(np.max(outside + far)) if support.size else 0.0)
    Z, E, X, wz2 = map(np.asarray, (Z, E, X, wz2))
    lhs_sup = float(np.max(et ** 2 * Z))
    lhs_energy = float(dt * np.sum(et ** 2 * E))
    time_term = 2.0 * float(dt * np.sum(et * det * Z))
    cut_term = float(dt * np.sum(et ** 2 * X))
    tail_term = 2.0 * max(reach) * float(dt * np.sum(wz2))
    res = _checked(
        f"caccioppoli.{'plus' if sign == '+' else 'minus'}",
        lhs_sup + lhs_energy,
        [("time_cutoff", time_term), ("space_cutoff", cut_term), ("tail", tail_term)],
        tolerance,
        params={"level": level, "sign": sign, "r": r, "center": list(np.atleast_1d(center).astype(float)),
                "t0": t0, "lhs_sup": lhs_sup, "lhs_energy": lhs_energy},
        cylinders=[_cyl_info(cyl, nodes, steps)],
        provenance=provenance(field, op),
    )
    return res


# ----------------------------------------------------------------- boundedness

def _globally_nonnegative(field: SpaceTimeField, center) -> bool:
    if np.min(field.interior) < 0 or (field.collar.size and np.min(field.collar) < 0):
        return False
    far = field.far
    if far is None or far.kind == "zero":
        return True
    if far.kind == "constant":
        return all(far.constant_at(float(t)) >= 0 for t in field.times)
    c = np.asarray(center, dtype=float)
    radii = np.geomspace(field.grid.R_inf, 1e6, 32)
    dirs = np.eye(field.grid.dim)
    pts = np.concatenate([c + radii[:, None] * d for d in np.vstack([dirs, -dirs])])
    return all(np.min(far.evaluate(pts, float(t))) >= 0 for t in field.times)


def audit_boundedness(field: SpaceTimeField, center, r: float, s: float, t0: float = 0.0,
                      sigma: float = DEFAULT_SIGMA, deltas: Sequence[float] = DELTAS) -> list[AuditResult]:
    """Smallest admissible constants in sup u <= delta T_r(u+) + C0 delta^(-(n+2s)/(4s)) mean_2(u+)."""
    grid = field.grid
    n = grid.dim
    _require_inside(field, center, 2.0 * r, sigma, s, t0)
    q1 = make_cylinder(grid, center, r, "standard", sigma, s, t0=t0)
    q2 = make_cylinder(grid, center, 2.0 * r, "standard", sigma, s, t0=t0)
    v1, n1, s1 = _member_values(field, q1)
    v2, n2, s2 = _member_values(field, q2)
    sup = float(np.max(v1))
    measure2 = q2.discrete_measure(grid, field.times)
    fat2 = (2.0 - sigma) * measure2
    cell_dt = grid.cell * field.dt
    mean_pos = math.sqrt(cell_dt * float(np.sum(np.maximum(v2, 0.0) ** 2)) / fat2)
    tail_pos = parabolic_tail(field, center, r, s, t0, "positive")
    expo = (n + 2.0 * s) / (4.0 * s)
    cyls = [_cyl_info(q1, n1, s1), _cyl_info(q2, n2, s2)]
    prov = provenance(field)
    out = []
    for d in deltas:
        if not 0 < d <= 1:
            raise InvalidParameter("delta must lie in (0, 1]")
        excess = sup - d * tail_pos
        scale = d ** (-expo) * mean_pos
        C0 = 0.0 if excess <= 0 else (math.inf if scale <= 0 else excess / scale)
        res = AuditResult(f"boundedness.delta={d:g}", sup,
                          [("tail", d * tail_pos), ("mean", C0 * scale if math.isfinite(C0) else math.inf)],
                          params={"delta": d, "tail_positive": tail_pos, "mean_l2": mean_pos,
                                  "exponent": expo, "sup": sup},
                          cylinders=cyls, provenance=prov)
        res.empirical_constant = C0
        res.passed = math.isfinite(C0)
        out.append(res)
    if _globally_nonnegative(field, center):
        mean_plain = math.sqrt(cell_dt * float(np.sum(v2 ** 2)) / measure2)
        C = smallest_constant(sup, mean_plain)
        res = AuditResult("boundedness.nonnegative", sup, [("mean", mean_plain)], constant=max(C, 0.0),
                          params={"mean_l2": mean_plain, "sup": sup}, cylinders=cyls, provenance=prov)
        res.empirical_constant = C
        res.passed = math.isfinite(C)
        out.append(res)
    else:
        out.append(_skipped("boundedness.nonnegative", "hypothesis-not-met: field takes negative values",
                            provenance=prov))
    return out


# ----------------------------------------------------------------- Harnack suite

def audit_harnack_suite(field: SpaceTimeField, center, r: float, R: float, s: float, t0: float = 0.0,
                        sigma: float = DEFAULT_SIGMA, powers: Sequence[float] = POWERS,
                        tolerance: float = DEFAULT_TOLERANCE) -> list[AuditResult]:
    grid = field.grid
    prov = provenance(field)
    ids = (["harnack.tail_relation"] + [f"harnack.weak.p={p:g}" for p in powers]
           + ["harnack.full", "harnack.tail_free"])
    if not 0 < r < R:
        raise InvalidParameter("need 0 < r < R")
    QR = _require_inside(field, center, R, sigma, s, t0)
    vR, nR, sR = _member_values(field, QR)
    if np.min(vR) < 0:
        return [_skipped(i, "hypothesis-not-met: u is negative inside Q_R", provenance=prov) for i in ids]
    Qr = make_cylinder(grid, center, r, "standard", sigma, s, t0=t0)
    Qp = make_cylinder(grid, center, r, "plus", sigma, s, t0=t0)
    Qm = make_cylinder(grid, center, r, "minus", sigma, s, t0=t0)
    vr, nr, sr = _member_values(field, Qr)
    vp, npl, sp = _member_values(field, Qp)
    vm, nm, sm = _member_values(field, Qm)
    sup_r, inf_plus, sup_minus = float(np.max(vr)), float(np.min(vp)), float(np.max(vm))
    ratio = (r / R) ** (2.0 * s)
    tail_pos_r = parabolic_tail(field, center, r, s, t0, "positive")
    tail_neg_r = parabolic_tail(field, center, r, s, t0, "negative")
    tail_neg_R = parabolic_tail(field, center, R, s, t0, "negative")
    common = {"center": list(np.atleast_1d(center).astype(float)), "r": r, "R": R, "t0": t0, "sigma": sigma}
    out = []

    res = _empirical("harnack.tail_relation", tail_pos_r,
                     [("sup_Qr", sup_r), ("scaled_tail_negative_R", ratio * tail_neg_R)],
                     params=common, cylinders=[_cyl_info(Qr, nr, sr)], provenance=prov)
    out.append(res)

    plus_measure = Qp.discrete_measure(grid, field.times)
    cell_dt = grid.cell * field.dt
    for p in powers:
        mean = (cell_dt * float(np.sum(vp ** p)) / (2.0 * plus_measure)) ** (1.0 / p)
        out.append(_checked(f"harnack.weak.p={p:g}", mean,
                            [("inf_plus", inf_plus), ("tail_negative", WEAK_HARNACK_TAIL * ratio * tail_neg_r)],
                            tolerance, params={**common, "p": p},
                            cylinders=[_cyl_info(Qp, npl, sp)], provenance=prov))

    cyl2 = [_cyl_info(Qm, nm, sm), _cyl_info(Qp, npl, sp)]
    if 5.0 * r < R:
        out.append(_empirical("harnack.full", sup_minus,
                              [("inf_plus", inf_plus), ("scaled_tail_negative", ratio * tail_neg_r)],
                              params=common, cylinders=cyl2, provenance=prov))
        if _globally_nonnegative(field, center):
            out.append(_empirical("harnack.tail_free", sup_minus, [("inf_plus", inf_plus)],
                                  params=common, cylinders=cyl2, provenance=prov))
        else:
            out.append(_skipped("harnack.tail_free", "hypothesis-not-met: field is not globally nonnegative",
                                provenance=prov))
    else:
        for i in ("harnack.full", "harnack.tail_free"):
            out.append(_skipped(i, "hypothesis-not-met: needs 5r < R", provenance=prov))
    return sorted(out, key=lambda a: a.check_id)
