"""Two numeric iteration lemmas: fast geometric decay of recursive sequences, and absorbing a
fraction of f(tau) into the left side of f(t) <= c1 (tau - t)^(-theta) + c2 + eps f(tau)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import HypothesisViolation, InvalidParameter

REL_TOL = 1e-12


@dataclass
class DecayReport:
    length: int
    threshold: float
    small_start: bool
    bounds: np.ndarray
    conclusion_holds: bool
    worst_ratio: float


def geometric_decay_check(N: Sequence[float], d0: float, e0: float, eps: float) -> DecayReport:
    """Check N_{k+1} <= d0 e0^k N_k^(1+eps) on the prefix, then N_k <= e0^(-k/eps) N_0 when N_0 is small enough."""
    if not (d0 > 0 and eps > 0 and e0 > 1):
        raise InvalidParameter("need d0 > 0, eps > 0 and e0 > 1")
    N = np.asarray(N, dtype=float)
    if N.ndim != 1 or N.size == 0 or np.any(N < 0) or not np.all(np.isfinite(N)):
        raise InvalidParameter("sequence must be a nonempty list of finite nonnegative numbers")
    for k in range(N.size - 1):
        bound = d0 * e0 ** k * N[k] ** (1.0 + eps)
        if N[k + 1] > bound * (1.0 + REL_TOL):
            raise HypothesisViolation(k, f"N[{k + 1}]={N[k + 1]:.6g} exceeds {bound:.6g}")
    threshold = d0 ** (-1.0 / eps) * e0 ** (-1.0 / eps ** 2)
    small = N[0] <= threshold * (1.0 + REL_TOL)
    bounds = e0 ** (-np.arange(N.size) / eps) * N[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bounds > 0, N / bounds, np.where(N > 0, np.inf, 0.0))
    worst = float(np.max(ratios))
    holds = bool(np.all(N <= bounds * (1.0 + REL_TOL) + 0.0))
    return DecayReport(int(N.size), float(threshold), bool(small), bounds, holds, worst)


def _absorb_factor(mu: float, theta: float, eps: float) -> float:
    q = eps * mu ** (-theta)
    if q >= 1.0:
        return math.inf
    return max((1.0 - mu) ** (-theta) / (1.0 - q), 1.0 / (1.0 - eps))


def interpolation_bound(c1: float, c2: float, theta: float, eps: float,
                        t_interval: tuple[float, float] | None = None) -> float:
    """Constant c with f(rho) <= c [c1 (R - rho)^(-theta) + c2].

    Inserting t_i = rho + (1 - mu^i)(R - rho) and iterating gives the factor
    max((1 - mu)^(-theta) / (1 - eps mu^(-theta)), 1 / (1 - eps)); mu is chosen to minimize it.
    """
    if not 0 <= eps < 1:
        raise InvalidParameter("eps must lie in [0, 1)")
    if theta < 0 or c1 < 0 or c2 < 0:
        raise InvalidParameter("theta, c1 and c2 must be nonnegative")
    if t_interval is not None and not t_interval[0] < t_interval[1]:
        raise InvalidParameter("interval must have positive length")
    if eps == 0:
        return 1.0
    if theta == 0:
        return 1.0 / (1.0 - eps)
    lo = eps ** (1.0 / theta)
    res = minimize_scalar(lambda m: _absorb_factor(m, theta, eps), bounds=(lo, 1.0),
                          method="bounded", options={"xatol": 1e-12})
    # any admissible mu gives a valid constant; the optimizer only sharpens it
    return float(min(res.fun, _absorb_factor(0.5 * (lo + 1.0), theta, eps)))


@dataclass
class InterpolationReport:
    constant: float
    hypothesis_pairs: int
    conclusion_pairs: int
    worst_ratio: float
    conclusion_holds: bool


def verify_interpolation(f: Callable | np.ndarray, times: np.ndarray, c1: float, c2: float,
                         theta: float, eps: float) -> InterpolationReport:
    """Check the hypothesis on every sampled pair t < tau, then the conclusion on every pair rho < R."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise InvalidParameter("sample times must be increasing")
    vals = np.asarray(f(t) if callable(f) else f, dtype=float)
    if vals.shape != t.shape or np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidParameter("f must be finite and nonnegative on the samples")
    c = interpolation_bound(c1, c2, theta, eps, (t[0], t[-1]))
    i, j = np.triu_indices(t.size, k=1)
    gap = t[j] - t[i]
    rhs = c1 * gap ** (-theta) + c2 + eps * vals[j]
    bad = np.flatnonzero(vals[i] > rhs * (1.0 + REL_TOL))
    if bad.size:
        k = int(i[bad[0]])
        raise HypothesisViolation(k, f"f({t[k]:.6g}) exceeds the hypothesis bound against tau={t[j[bad[0]]]:.6g}")
    bound = c * (c1 * gap ** (-theta) + c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, vals[i] / bound, np.where(vals[i] > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    return InterpolationReport(c, int(i.size), int(i.size), worst, bool(worst <= 1.0 + REL_TOL))
