"""Reference for the density dilation, written against the definition only: one centre and one scale at a time."""

import math

import numpy as np

from nlheat.covering import scale_grid


def _cylinder_members(host, rho_max):
    xs, ts = host.points
    sig, s = host.sigma, host.s
    out = []
    for rho in scale_grid(host, rho_max):
        big = 3.0 * rho
        depth = sig * big ** (2 * s)
        per_centre = []
        for a in range(host.size):
            near = np.sqrt(np.sum((xs - xs[a]) ** 2, axis=1)) < big * (1 - 1e-10)
            lag = ts[a] - ts
            past = (lag >= -1e-10 * depth) & (lag < depth * (1 - 1e-10))
            per_centre.append(np.flatnonzero(near & past))
        out.append((rho, per_centre))
    return out


_cache = {}


def dilate_by_loops(E, gamma, rho_max=None):
    host = E.host
    rho_max = host.r if rho_max is None else rho_max
    key = (id(host), rho_max)
    if key not in _cache:
        _cache[key] = (host, _cylinder_members(host, rho_max))
    unit = math.pi if host.dim == 2 else 2.0
    out = np.zeros(host.size, dtype=bool)
    for rho, per_centre in _cache[key][1]:
        target = gamma * unit * rho ** host.dim * host.sigma * rho ** (2 * host.s)
        for idx in per_centre:
            if int(E.mask[idx].sum()) * host.cell > target:
                out[idx] = True
    return out.tolist()
