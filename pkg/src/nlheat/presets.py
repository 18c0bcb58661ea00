"""Named analytic data for scenario configs: each preset builds a function of (x, t)."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from .errors import InvalidParameter

DataFn = Callable[[np.ndarray, float], np.ndarray]

PRESETS = {
    "constant": "value (finite)",
    "linear-in-t": "a + b t; a, b finite",
    "sine-bump": "amplitude * prod sin(pi (x_i - lo_i)/(hi_i - lo_i)) on the box [lo, hi], 0 outside; "
                 "box defaults to the domain",
    "indicator-annulus": "value on inner <= |x - center| < outer, `outside` elsewhere; 0 <= inner < outer",
    "eigenmode": "amplitude * e_index of the discrete Dirichlet problem, index >= 1 (initial data and forcing only)",
    "tabulated": "piecewise-linear interpolation of a CSV with columns x[, y], value (nearest value outside the hull)",
}


def _num(spec: dict, key: str, default=None) -> float:
    if key not in spec:
        if default is None:
            raise InvalidParameter(f"preset {spec.get('preset')!r} needs parameter {key!r}")
        return default
    v = spec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InvalidParameter(f"parameter {key!r} must be a finite number")
    return float(v)


def _vec(spec: dict, key: str, dim: int, default=None) -> np.ndarray:
    v = spec.get(key, default)
    if v is None:
        raise InvalidParameter(f"preset {spec.get('preset')!r} needs parameter {key!r}")
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"parameter {key!r} must be {dim} finite numbers")
    return arr


def constant(value: float) -> DataFn:
    return lambda x, t: np.full(len(x), value)


def linear_in_t(a: float, b: float) -> DataFn:
    return lambda x, t: np.full(len(x), a + b * t)


def sine_bump(amplitude: float, lo: np.ndarray, hi: np.ndarray) -> DataFn:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def fn(x, t):
        x = np.atleast_2d(x)
        u = (x - lo) / (hi - lo)
        inside = np.all((u > 0) & (u < 1), axis=1)
        return np.where(inside, amplitude * np.prod(np.sin(np.pi * np.clip(u, 0, 1)), axis=1), 0.0)
    return fn


def indicator_annulus(center: np.ndarray, inner: float, outer: float, value: float = 1.0,
                      outside: float = 0.0) -> DataFn:
    c = np.asarray(center, dtype=float)

    def fn(x, t):
        d = np.linalg.norm(np.atleast_2d(x) - c, axis=1)
        return np.where((d >= inner) & (d < outer), value, outside)
    return fn


def tabulated(path, dim: int) -> DataFn:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise InvalidParameter(f"{path}: non-numeric entry ({exc})") from exc
    if body.ndim != 2 or body.shape[1] != dim + 1 or len(body) < 2:
        raise InvalidParameter(f"{path}: expected columns x{', y' if dim == 2 else ''}, value")
    pts, vals = body[:, :dim], body[:, dim]
    if dim == 1:
        order = np.argsort(pts[:, 0])
        xs, vs = pts[order, 0], vals[order]
        return lambda x, t: np.interp(np.atleast_2d(x)[:, 0], xs, vs)
    lin = LinearNDInterpolator(pts, vals)
    near = NearestNDInterpolator(pts, vals)

    def fn(x, t):
        v = lin(x)
        return np.where(np.isnan(v), near(x), v)
    return fn


def build(spec, dim: int, domain: np.ndarray, base_dir: Path | None = None, basis=None) -> DataFn | np.ndarray:
    """Data from a preset spec (a dict with key 'preset', or a bare number for a constant)."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return constant(_num({"value": spec}, "value"))
    if not isinstance(spec, dict) or "preset" not in spec:
        raise InvalidParameter("data spec must be a number or an object with a 'preset' key")
    name = spec["preset"]
    if name == "constant":
        return constant(_num(spec, "value"))
    if name == "linear-in-t":
        return linear_in_t(_num(spec, "a", 0.0), _num(spec, "b"))
    if name == "sine-bump":
        lo = _vec(spec, "lo", dim, domain[:, 0])
        hi = _vec(spec, "hi", dim, domain[:, 1])
        if np.any(hi <= lo):
            raise InvalidParameter("sine-bump box needs lo < hi")
        return sine_bump(_num(spec, "amplitude", 1.0), lo, hi)
    if name == "indicator-annulus":
        inner, outer = _num(spec, "inner", 0.0), _num(spec, "outer")
        if not 0 <= inner < outer:
            raise InvalidParameter("indicator-annulus needs 0 <= inner < outer")
        return indicator_annulus(_vec(spec, "center", dim), inner, outer, _num(spec, "value", 1.0),
                                 _num(spec, "outside", 0.0))
    if name == "eigenmode":
        idx = spec.get("index")
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 1:
            raise InvalidParameter("eigenmode index must be an integer >= 1")
        if basis is None:
            raise InvalidParameter("eigenmode preset is only available for initial data and forcing")
        if idx > basis.count:
            raise InvalidParameter(f"eigenmode index {idx} exceeds the {basis.count} computed modes")
        return _num(spec, "amplitude", 1.0) * basis.mode(idx - 1)
    if name == "tabulated":
        path = Path(spec.get("path", ""))
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.is_file():
            raise InvalidParameter(f"tabulated data file {str(path)!r} not found")
        return tabulated(path, dim)
    raise InvalidParameter(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
