"""Scenario runner: JSON config in, report.json / fields.csv / constants_vs_h.csv out.

Exit status: 0 every non-skipped audit passed, 1 some audit failed, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import presets
from .audit import (AuditResult, OrderScenario, audit_boundedness, audit_caccioppoli,
                    audit_harnack_suite, audit_order_principles)
from .covering import CoveringHost, ParabolicPointSet, covering_dichotomy
from .errors import HypothesisViolation
from .evolution import galerkin_solve, hat_functions, lift_and_solve, monotone_solve, weak_residual
from .iterlemmas import geometric_decay_check, verify_interpolation
from .kernel import load_profile_csv, make_custom_kernel, make_fractional_kernel
from .lattice import DEFAULT_SIGMA, build_grid, check_sigma, make_time_grid
from .nonlocal_op import assemble, subgrid_error_estimate
from .spectral import solve_eigenproblem

SCHEMA_VERSION = 1
SCHEMES = ("galerkin", "monotone", "both")

CHECKS = {
    "order": "sign, comparison and sup-bound principles on the monotone scheme",
    "caccioppoli": "energy of (u - level)_+ or (level - u)_+ against cutoff and tail terms",
    "boundedness": "sup over Q_r against tail and L2 mean over Q_2r, delta in {0.25, 0.5, 1}",
    "harnack": "tail relation, weak Harnack (explicit constants), full and tail-free Harnack",
    "covering": "seeded random masks: the covering dichotomy for density dilations",
    "iteration": "seeded geometric-decay sequences and the interpolation lemma examples",
}


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


@dataclass
class Scenario:
    config: dict
    text: str
    path: Path

    def fail(self, key: str, message: str):
        raise ConfigError(message, _line_of(self.text, key))


def _number(sc: Scenario, cfg: dict, key: str, default=None, positive=False) -> float:
    v = cfg.get(key, default)
    if v is None:
        sc.fail(key, f"missing required key {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        sc.fail(key, f"{key} must be a finite number, got {v!r}")
    if positive and v <= 0:
        sc.fail(key, f"{key} must be positive, got {v!r}")
    return float(v)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", 1)
    sc = Scenario(cfg, text, path)
    return Scenario(resolve(sc), text, path)


_CYLINDER = {"center", "r", "sigma", "tolerance", "t0"}
AUDIT_KEYS = {
    "harnack": _CYLINDER | {"R", "powers"},
    "boundedness": _CYLINDER | {"deltas"},
    "caccioppoli": _CYLINDER | {"level", "sign"},
    "order": {"compare", "bound_tolerance"},
    "covering": {"dim", "side", "steps", "sigma", "s", "trials", "gammas", "density"},
    "iteration": {"trials"},
}


def resolve(sc: Scenario) -> dict:
    """Config with every default filled in and every value checked."""
    cfg = sc.config
    known = {"kernel", "domain", "h", "R_inf", "T", "dt", "modes", "scheme", "data", "sigma",
             "tolerance", "seed", "refinements", "audits", "name"}
    for key in cfg:
        if key not in known:
            sc.fail(key, f"unknown key {key!r}")
    out = {"name": str(cfg.get("name", sc.path.stem))}
    kern = cfg.get("kernel", {"type": "fractional", "s": 0.5})
    if not isinstance(kern, dict) or kern.get("type", "fractional") not in ("fractional", "custom"):
        sc.fail("kernel", "kernel must be an object with type 'fractional' or 'custom'")
    s = _number(sc, kern, "s", 0.5)
    if not 0 < s < 1:
        sc.fail("s", f"order s must lie in (0, 1), got {s}")
    out["kernel"] = {"type": kern.get("type", "fractional"), "s": s}
    if out["kernel"]["type"] == "custom":
        for key in ("lam", "Lam"):
            out["kernel"][key] = _number(sc, kern, key, positive=True)
        if "profile_csv" not in kern:
            sc.fail("kernel", "custom kernel needs 'profile_csv'")
        out["kernel"]["profile_csv"] = str(kern["profile_csv"])
    domain = cfg.get("domain", [[0.0, 1.0]])
    try:
        bounds = np.atleast_2d(np.asarray(domain, dtype=float))
        assert bounds.shape[1] == 2 and bounds.shape[0] in (1, 2) and np.all(bounds[:, 0] < bounds[:, 1])
    except (ValueError, TypeError, AssertionError, IndexError):
        sc.fail("domain", "domain must be [[lo, hi]] or [[lo, hi], [lo, hi]] with lo < hi")
    out["domain"] = bounds.tolist()
    out["h"] = _number(sc, cfg, "h", positive=True)
    diam = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    out["R_inf"] = _number(sc, cfg, "R_inf", 2.0 * diam, positive=True)
    if out["R_inf"] < 2.0 * diam * (1 - 1e-12):
        sc.fail("R_inf", f"R_inf must be at least twice the domain diameter {diam:.6g}")
    out["T"] = _number(sc, cfg, "T", positive=True)
    out["dt"] = None if cfg.get("dt") is None else _number(sc, cfg, "dt", positive=True)
    modes = cfg.get("modes")
    if modes is not None and (not isinstance(modes, int) or isinstance(modes, bool) or modes < 1):
        sc.fail("modes", "modes must be a positive integer or null (all modes)")
    out["modes"] = modes
    scheme = cfg.get("scheme", "monotone")
    if scheme not in SCHEMES:
        sc.fail("scheme", f"scheme must be one of {SCHEMES}, got {scheme!r}")
    out["scheme"] = scheme
    out["sigma"] = _number(sc, cfg, "sigma", DEFAULT_SIGMA)
    try:
        check_sigma(out["sigma"])
    except ValueError as exc:
        sc.fail("sigma", str(exc))
    out["tolerance"] = _number(sc, cfg, "tolerance", 0.1)
    if out["tolerance"] < 0:
        sc.fail("tolerance", "tolerance must be nonnegative")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        sc.fail("seed", "seed must be an unsigned 64-bit integer")
    out["seed"] = seed
    refs = cfg.get("refinements", [1.0])
    if (not isinstance(refs, list) or not refs
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and 0 < v <= 1 for v in refs)):
        sc.fail("refinements", "refinements must be a nonempty list of mesh factors in (0, 1]")
    out["refinements"] = [float(v) for v in refs]
    data = cfg.get("data", {})
    if not isinstance(data, dict) or any(k not in ("g", "f", "h") for k in data):
        sc.fail("data", "data must be an object with optional keys g, f, h")
    out["data"] = {k: data.get(k, 0.0) for k in ("g", "f", "h")}
    audits = cfg.get("audits", [])
    if not isinstance(audits, list):
        sc.fail("audits", "audits must be a list")
    for a in audits:
        if not isinstance(a, dict) or a.get("check") not in CHECKS:
            sc.fail("check", f"each audit needs 'check' from {sorted(CHECKS)}")
        for key in a:
            if key != "check" and key not in AUDIT_KEYS[a["check"]]:
                sc.fail(key, f"audit {a['check']!r} does not take {key!r}; "
                             f"allowed: {sorted(AUDIT_KEYS[a['check']])}")
        if "sigma" in a:
            try:
                check_sigma(_number(sc, a, "sigma"))
            except ValueError as exc:
                sc.fail("sigma", str(exc))
    out["audits"] = audits
    return out


# ----------------------------------------------------------------- solving

@dataclass
class Run:
    h: float
    grid: object
    op: object
    times: np.ndarray
    basis: object
    fields: dict
    data: dict
    diagnostics: dict


def _kernel(cfg: dict, n: int, base: Path):
    k = cfg["kernel"]
    if k["type"] == "fractional":
        return make_fractional_kernel(n, k["s"])
    path = Path(k["profile_csv"])
    path = path if path.is_absolute() else base / path
    profile = load_profile_csv(path, n, k["s"])
    return make_custom_kernel(n, k["s"], k["lam"], k["Lam"], profile, h_min=cfg["h"] / 4,
                              R_inf=cfg["R_inf"], name="tabulated")


def _data(spec, role: str, cfg: dict, grid, basis, base: Path):
    try:
        built = presets.build(spec, grid.dim, grid.bounds, base, basis if role != "g" else None)
    except ValueError as exc:
        raise ConfigError(f"data.{role}: {exc}") from exc
    if isinstance(built, np.ndarray) and role == "g":
        raise ConfigError("data.g: exterior data must be an analytic preset")
    return built


def solve(sc: Scenario, factor: float) -> Run:
    cfg = sc.config
    base = sc.path.parent
    h = cfg["h"] * factor
    n = len(cfg["domain"])
    grid = build_grid(cfg["domain"], h, cfg["R_inf"])
    kernel = _kernel(cfg, n, base)
    op = assemble(grid, kernel)
    dt = None if cfg["dt"] is None else cfg["dt"] * factor
    times = make_time_grid(cfg["T"], dt, h=h, s=kernel.s)
    need_basis = cfg["scheme"] != "monotone" or any(
        isinstance(v, dict) and v.get("preset") == "eigenmode" for v in cfg["data"].values())
    basis = solve_eigenproblem(op, cfg["modes"] if cfg["modes"] is None else min(cfg["modes"], grid.n_interior)) \
        if need_basis else None
    g = _data(cfg["data"]["g"], "g", cfg, grid, basis, base)
    f = _data(cfg["data"]["f"], "f", cfg, grid, basis, base)
    hd = _data(cfg["data"]["h"], "h", cfg, grid, basis, base)
    h_init = hd if isinstance(hd, np.ndarray) else (lambda x, fn=hd, t0=float(times[0]): fn(x, t0))
    fields = {}
    if cfg["scheme"] in ("galerkin", "both"):
        fields["galerkin"] = lift_and_solve(g, f, h_init, basis, times)
    if cfg["scheme"] in ("monotone", "both"):
        fields["monotone"] = monotone_solve(op, g, f, h_init, times)
    diag = {"quadrature": op.quadrature, "time_step": float(times[1] - times[0]), "time_nodes": len(times),
            "schemes": {}}
    hats = hat_functions(grid)
    for name, u in fields.items():
        res = weak_residual(op, u, f, hats)
        diag["schemes"][name] = {
            "max_u": float(np.max(u.interior)), "min_u": float(np.min(u.interior)),
            "weak_residual_max": res["max"], "weak_residual_rms": res["rms"],
            "subgrid_error": subgrid_error_estimate(op, u, len(times) - 1),
        }
    if basis is not None:
        init = hd if isinstance(hd, np.ndarray) else h_init(grid.interior_nodes)
        diag["spectral"] = {"modes": basis.count, "first_eigenvalue": float(basis.eigenvalues[0]),
                            "truncation_error_initial": basis.truncation_error(init)}
    if len(fields) == 2:
        diag["cross_scheme_max_difference"] = float(
            np.max(np.abs(fields["galerkin"].interior - fields["monotone"].interior)))
    return Run(h, grid, op, times, basis, fields, {"g": g, "f": f, "h": h_init}, diag)


# ----------------------------------------------------------------- audits

def _center(a: dict, n: int):
    c = a.get("center")
    if c is None:
        raise ConfigError("audit needs 'center'")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (n,):
        raise ConfigError(f"audit center must have {n} coordinates")
    return c


def _field_audits(a: dict, run: Run, cfg: dict) -> list[AuditResult]:
    n = run.grid.dim
    sigma = float(a.get("sigma", cfg["sigma"]))
    tol = float(a.get("tolerance", cfg["tolerance"]))
    t0 = float(a.get("t0", 0.0))
    s = run.op.kernel.s
    out = []
    for scheme, u in run.fields.items():
        if a["check"] == "harnack":
            res = audit_harnack_suite(u, _center(a, n), float(a["r"]), float(a["R"]), s, t0, sigma,
                                      a.get("powers", (0.25, 0.5, 0.75)), tol)
        elif a["check"] == "boundedness":
            res = audit_boundedness(u, _center(a, n), float(a["r"]), s, t0, sigma,
                                    a.get("deltas", (0.25, 0.5, 1.0)))
        else:
            res = [audit_caccioppoli(run.op, u, _center(a, n), float(a["r"]), float(a.get("level", 0.0)),
                                     a.get("sign", "+"), t0, sigma, tolerance=tol)]
        for r in res:
            r.check_id = f"{scheme}/{r.check_id}"
        out.extend(res)
    return out


def _order_audit(a: dict, run: Run, cfg: dict, base: Path) -> list[AuditResult]:
    comp = a.get("compare", {})
    other = {k: _data(comp[k], k, cfg, run.grid, run.basis, base) if k in comp else None for k in ("g", "f", "h")}
    h2 = other["h"]
    if h2 is not None and not isinstance(h2, np.ndarray):
        h2 = (lambda x, fn=h2, t0=float(run.times[0]): fn(x, t0))
    sc = OrderScenario(run.op, run.times, run.data["g"], run.data["f"], run.data["h"],
                       other["g"], other["f"], h2, float(a.get("bound_tolerance", 0.02)))
    return audit_order_principles(sc)


def _covering_audit(a: dict, seed: int) -> list[AuditResult]:
    rng = np.random.default_rng(seed)
    host = CoveringHost(int(a.get("dim", 2)), int(a.get("side", 8)), int(a.get("steps", 8)),
                        sigma=float(a.get("sigma", DEFAULT_SIGMA)), s=float(a.get("s", 0.5)))
    trials = int(a.get("trials", 20))
    gammas = [float(g) for g in a.get("gammas", (0.05, 0.1, 0.3))]
    lo, hi = a.get("density", (0.02, 0.5))
    failures = {g: 0 for g in gammas}
    for _ in range(trials):
        E = ParabolicPointSet.random(host, float(rng.uniform(lo, hi)), rng)
        for gam in gammas:
            failures[gam] += not covering_dichotomy(E, gam, raise_on_failure=False).holds
    out = []
    for gam in gammas:
        r = AuditResult(f"covering.gamma={gam:g}", float(failures[gam]), [("allowed", 0.0)],
                        params={"trials": trials, "host": host.describe(), "seed": seed})
        r.passed = failures[gam] == 0
        r.empirical_constant = float(failures[gam])
        out.append(r)
    return out


def _iteration_audit(a: dict, seed: int) -> list[AuditResult]:
    rng = np.random.default_rng(seed)
    trials = int(a.get("trials", 100))
    worst, bad = 0.0, 0
    for _ in range(trials):
        d0, e0, eps = rng.uniform(0.5, 4.0), rng.uniform(1.1, 4.0), rng.uniform(0.2, 2.0)
        N = [d0 ** (-1.0 / eps) * e0 ** (-1.0 / eps ** 2) * rng.uniform(0.1, 1.0)]
        for k in range(12):
            N.append(d0 * e0 ** k * N[-1] ** (1.0 + eps))
        try:
            rep = geometric_decay_check(N, d0, e0, eps)
        except HypothesisViolation:
            bad += 1
            continue
        bad += not rep.conclusion_holds
        worst = max(worst, rep.worst_ratio)
    decay = AuditResult("iteration.geometric_decay", worst, [("bound", 1.0)], tolerance=1e-12,
                        params={"trials": trials, "seed": seed, "failures": bad})
    decay.passed = bad == 0
    decay.empirical_constant = worst
    out = [decay]
    t = np.linspace(0.0, 0.99, 200)
    examples = {
        "iteration.interpolation.zero_eps": (lambda x: (1.0 - x) ** -1.0 * 0.5, 1.0, 0.0, 1.0, 0.0),
        "iteration.interpolation.constant": (lambda x: np.full_like(x, 1.0), 1.0, 1.0, 1.0, 0.2),
        "iteration.interpolation.power": (lambda x: (1.0 - x) ** -1.0, 1.0, 0.0, 1.0, 0.5),
    }
    for cid, (fn, c1, c2, theta, eps) in examples.items():
        rep = verify_interpolation(fn, t, c1, c2, theta, eps)
        r = AuditResult(cid, rep.worst_ratio, [("bound", 1.0)], constant=1.0,
                        params={"c1": c1, "c2": c2, "theta": theta, "eps": eps, "c": rep.constant})
        r.passed = rep.conclusion_holds
        r.empirical_constant = rep.constant
        out.append(r)
    return out


def run_audits(sc: Scenario, run: Run, seed: int, threads: int) -> list[AuditResult]:
    cfg = sc.config
    base = sc.path.parent

    def task(a):
        kind = a["check"]
        try:
            if kind == "order":
                return _order_audit(a, run, cfg, base)
            if kind == "covering":
                return _covering_audit(a, seed)
            if kind == "iteration":
                return _iteration_audit(a, seed)
            return _field_audits(a, run, cfg)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"audit {kind!r}: missing or malformed parameter {exc}", _line_of(sc.text, "audits"))
        except ValueError as exc:
            raise ConfigError(f"audit {kind!r}: {exc}", _line_of(sc.text, "audits")) from exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        batches = list(pool.map(task, cfg["audits"]))
    results = [r for batch in batches for r in batch]
    return sorted(results, key=lambda r: r.check_id)


# ----------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_fields(run: Run, path: Path) -> None:
    coords = ["x", "y"][: run.grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme"] + coords + ["t", "value"])
        for name, u in run.fields.items():
            for m, t in enumerate(u.times):
                for p, v in zip(run.grid.interior_nodes, u.interior[m]):
                    w.writerow([name] + [repr(float(c)) for c in p] + [repr(float(t)), repr(float(v))])


def _write_constants(rows: list, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check_id", "h", "empirical_constant", "pass", "skipped"])
        for h, r in rows:
            w.writerow([r.check_id, repr(h), repr(float(r.empirical_constant)), int(r.passed), int(r.skipped)])


def run_scenario(config_path, out_dir, seed: int | None = None, threads: int = 1) -> int:
    try:
        sc = load_scenario(config_path)
        if seed is not None:
            if not 0 <= seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            sc.config["seed"] = seed
        cfg = sc.config
        runs, constant_rows = [], []
        primary = None
        for factor in cfg["refinements"]:
            try:
                run = solve(sc, factor)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(str(exc), _line_of(sc.text, "h")) from exc
            results = run_audits(sc, run, cfg["seed"], threads)
            constant_rows.extend((run.h, r) for r in results)
            runs.append({"h": run.h, "diagnostics": run.diagnostics})
            if primary is None:
                primary = (run, results)
    except ConfigError as exc:
        where = f"{config_path}:{exc.line}" if exc.line else str(config_path)
        print(f"{where}: config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"{config_path}: solver error: {exc}", file=sys.stderr)
        return 3
    run, results = primary
    active = [r for r in results if not r.skipped]
    status = "pass" if all(r.passed for r in active) else "fail"
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "mesh": run.grid.describe(),
        "time": {"T": cfg["T"], "dt": float(run.times[1] - run.times[0]), "nodes": len(run.times)},
        "diagnostics": run.diagnostics,
        "refinements": runs,
        "audits": [r.to_dict() for r in results],
        "summary": {"status": status, "passed": sum(r.passed for r in active),
                    "failed": sum(not r.passed for r in active), "skipped": len(results) - len(active)},
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    _write_fields(run, out / "fields.csv")
    _write_constants(constant_rows, out / "constants_vs_h.csv")
    print(f"{cfg['name']}: {status} ({report['summary']['passed']} passed, "
          f"{report['summary']['failed']} failed, {report['summary']['skipped']} skipped)")
    return 0 if status == "pass" else 1


def bundled_scenarios() -> Path:
    return Path(__file__).with_name("scenarios")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nlheat", description="Nonlocal heat equation scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1)
    sub.add_parser("list-checks", help="list audit checks")
    sub.add_parser("list-presets", help="list data presets")
    args = parser.parse_args(argv)
    if args.command == "list-checks":
        for name, text in CHECKS.items():
            print(f"{name:12s} {text}")
        return 0
    if args.command == "list-presets":
        for name, text in presets.PRESETS.items():
            print(f"{name:18s} {text}")
        print(f"\nbundled scenarios: {bundled_scenarios()}")
        return 0
    return run_scenario(args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
