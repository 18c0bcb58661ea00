"""Symmetric jump kernels of fractional order and their normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidParameter, KernelRejected

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * math.pi}

# radii far beyond any domain; bounded exterior data is evaluated there at most
_MAX_LOG_STRETCH = math.log(1e15)
_FAR_ORDER = 24


def _check_order(n: int, s: float) -> None:
    if n not in (1, 2):
        raise InvalidParameter(f"dimension must be 1 or 2, got {n}")
    if not (0.0 < s < 1.0):
        raise InvalidParameter(f"order s must lie in (0, 1), got {s}")


def _smooth_cos_quotient(t: float) -> float:
    if t < 1e-4:
        return 0.5 - t * t / 24.0
    return 2.0 * math.sin(0.5 * t) ** 2 / (t * t)


def _half_line_integral(s: float) -> float:
    """int_0^inf (1 - cos t) t^(-1-2s) dt, split at t = 1."""
    # (1 - cos t)/t^2 is smooth; the algebraic weight carries t^(1-2s)
    inner, _ = integrate.quad(
        _smooth_cos_quotient, 0.0, 1.0,
        weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=1e-14, epsrel=1e-13,
    )
    cos_tail, _ = integrate.quad(
        lambda t: t ** (-1.0 - 2.0 * s), 1.0, np.inf,
        weight="cos", wvar=1.0, epsabs=1e-12, limlst=200,
    )
    return inner + 1.0 / (2.0 * s) - cos_tail


@lru_cache(maxsize=None)
def gagliardo_integral(n: int, s: float) -> float:
    """int_{R^n} (1 - cos xi_1) |xi|^(-n-2s) d xi by adaptive quadrature."""
    _check_order(n, s)
    one_d = 2.0 * _half_line_integral(s)
    if n == 1:
        return one_d
    # integrate the transverse variable first: |xi_1|^(-1-2s) * int (1+u^2)^(-1-s) du
    transverse, _ = integrate.quad(
        lambda u: (1.0 + u * u) ** (-1.0 - s), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13
    )
    return transverse * one_d


@lru_cache(maxsize=None)
def normalization_constant(n: int, s: float) -> float:
    """Constant c with c * |y|^(-n-2s) giving the Fourier multiplier |xi|^(2s).

    Comparable to s(1-s): vanishes at both ends of (0, 1).
    """
    return 1.0 / (2.0 * gagliardo_integral(n, s))


@dataclass(frozen=True)
class Kernel:
    """Radial kernel K(y) = profile(|y|) with ellipticity constants (lam, Lam)."""

    dim: int
    s: float
    lam: float
    Lam: float
    profile: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    coefficient: float | None = None
    name: str = "custom"

    @property
    def exponent(self) -> float:
        return self.dim + 2.0 * self.s

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.coefficient is not None:
            return self.coefficient * r ** (-self.exponent)
        return np.asarray(self.profile(r), dtype=float)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            return self.radial(np.abs(y))
        return self.radial(np.linalg.norm(y, axis=-1))

    def envelope(self, r) -> tuple[np.ndarray, np.ndarray]:
        base = (1.0 - self.s) * np.asarray(r, dtype=float) ** (-self.exponent)
        return self.lam * base, self.Lam * base

    def scaled(self, factor: float) -> "Kernel":
        if factor <= 0:
            raise InvalidParameter("kernel scale factor must be positive")
        coef = None if self.coefficient is None else self.coefficient * factor
        prof = self.profile
        return replace(
            self, lam=self.lam * factor, Lam=self.Lam * factor, coefficient=coef,
            profile=lambda r: factor * np.asarray(prof(r), dtype=float),
            name=f"{self.name}*{factor:g}",
        )

    def far_quadrature(self, R: float, order: int = _FAR_ORDER) -> tuple[np.ndarray, np.ndarray]:
        """Radii r_j > R and weights W_j with int_{|y|>R} phi K ~ sum_j W_j avg_{|theta|=1} phi(r_j theta).

        Gauss-Laguerre in log(r/R); exact for phi = const when K is a pure power law.
        """
        x, w = np.polynomial.laguerre.laggauss(order)
        two_s = 2.0 * self.s
        stretch = np.minimum(x / two_s, _MAX_LOG_STRETCH)
        r = R * np.exp(stretch)
        # K(r) r^(n+2s) is constant for power laws; include it for custom profiles
        shape = self.radial(r) * r ** self.exponent
        W = SPHERE_MEASURE[self.dim] * w * R ** (-two_s) / two_s * shape
        return r, W

    def far_integral(self, R: float) -> float:
        """int_{|y|>R} K(y) dy."""
        if self.coefficient is not None:
            return self.coefficient * SPHERE_MEASURE[self.dim] * R ** (-2.0 * self.s) / (2.0 * self.s)
        return float(np.sum(self.far_quadrature(R)[1]))


def make_fractional_kernel(n: int, s: float) -> Kernel:
    _check_order(n, s)
    c = normalization_constant(n, s)
    ell = c / (1.0 - s)
    return Kernel(
        dim=n, s=s, lam=ell, Lam=ell, coefficient=c,
        profile=lambda r, c=c, e=n + 2.0 * s: c * np.asarray(r, dtype=float) ** (-e),
        name="fractional",
    )


def validation_radii(h_min: float, R_inf: float, count: int = 64) -> np.ndarray:
    return np.geomspace(h_min, R_inf, count)


def make_custom_kernel(
    n: int,
    s: float,
    lam: float,
    Lam: float,
    profile: Callable[[np.ndarray], np.ndarray],
    h_min: float = 1e-3,
    R_inf: float = 10.0,
    name: str = "custom",
) -> Kernel:
    """Wrap a radial profile, rejecting it if the ellipticity sandwich fails on sample radii."""
    _check_order(n, s)
    if not (0.0 < lam <= Lam):
        raise InvalidParameter(f"need 0 < lambda <= Lambda, got {lam}, {Lam}")
    radii = validation_radii(h_min, R_inf)
    values = np.asarray(profile(radii), dtype=float)
    if values.shape != radii.shape or not np.all(np.isfinite(values)):
        raise InvalidParameter("profile must return finite values for every radius")
    base = (1.0 - s) * radii ** (-(n + 2.0 * s))
    lower, upper = lam * base, Lam * base
    bad = np.flatnonzero((values < lower) | (values > upper) | (values <= 0))
    if bad.size:
        i = int(bad[0])
        raise KernelRejected(float(radii[i]), float(values[i]), float(lower[i]), float(upper[i]))
    return Kernel(dim=n, s=s, lam=lam, Lam=Lam, profile=profile, name=name)


def tabulated_profile(radii, values, n: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    """Log-log interpolation of a radial table, continued as a power law beyond both ends."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(radii)
    lr, lv = np.log(radii[order]), np.log(values[order])
    slope = -(n + 2.0 * s)

    def profile(r):
        lq = np.log(np.asarray(r, dtype=float))
        out = np.interp(lq, lr, lv)
        out = np.where(lq < lr[0], lv[0] + slope * (lq - lr[0]), out)
        out = np.where(lq > lr[-1], lv[-1] + slope * (lq - lr[-1]), out)
        return np.exp(out)

    return profile


def load_profile_csv(path, n: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if table.shape[1] != 2:
        raise InvalidParameter(f"{path}: expected two columns radius,value")
    return tabulated_profile(table[:, 0], table[:, 1], n, s)
