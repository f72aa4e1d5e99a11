"""One-dimensional maximization: golden-section search and grid scan + refine."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class GridConfig:
    """Resolution of the price grid and the refinement tolerance (in price units).

    Grid values within ``tie_rtol`` (relative) of the best one count as ties.
    """

    points: int = 4001
    tol: float = 1e-10
    tie_rtol: float = 1e-12

    def __post_init__(self):
        if self.points < 3:
            raise ValueError(f"grid points must be >= 3, got {self.points}")
        if not self.tol > 0:
            raise ValueError(f"grid tol must be positive, got {self.tol}")


def golden_section_max(f: Callable, a, b, tol: float = 1e-10):
    """Maximize a unimodal ``f`` on ``[a, b]``.

    ``f`` must accept numpy arrays; ``a`` and ``b`` may be arrays of equal
    shape, in which case many independent problems are solved in lockstep.
    Returns ``(x, f(x))``.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    dist = b - a
    width = float(np.max(dist)) if dist.size else 0.0
    if width <= tol:
        x = (a + b) / 2
        return x, f(x)

    n = int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))
    c = a + INV_PHI_SQ * dist
    d = a + INV_PHI * dist
    fc = f(c)
    fd = f(d)
    for _ in range(n):
        # keep the left point on ties so flat objectives drift toward a
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        dist = dist * INV_PHI
        new_c = np.where(left, a + INV_PHI_SQ * dist, d)
        new_d = np.where(left, c, a + INV_PHI * dist)
        c, d = new_c, new_d
        fc_old = fc
        fc = np.where(left, f(c), fd)
        fd = np.where(left, fc_old, f(d))
    x = np.where(fc >= fd, c, d)
    return x, f(x)


def grid_maximize(f: Callable, lo: float, hi: float, grid: GridConfig = GridConfig()):
    """Maximize ``f`` over ``[lo, hi]`` by a dense scan then golden refinement.

    The refinement runs on the two grid cells around the best grid point and
    only replaces it when strictly better. Grid values equal to the maximum
    up to rounding (``grid.tie_rtol``) are ties and resolve to the lowest
    price, so mathematically symmetric objectives do not pick an end by
    floating-point noise.
    """
    if not lo < hi:
        raise ValueError(f"interval must satisfy l < u, got ({lo}, {hi})")
    xs = np.linspace(lo, hi, grid.points)
    vals = np.asarray(f(xs), dtype=float)
    top = float(np.max(vals))
    j = int(np.argmax(vals >= top - grid.tie_rtol * max(1.0, abs(top))))
    best_x, best_v = float(xs[j]), float(vals[j])
    a = xs[max(j - 1, 0)]
    b = xs[min(j + 1, grid.points - 1)]
    x, v = golden_section_max(f, a, b, grid.tol)
    if float(v) > best_v:
        best_x, best_v = float(x), float(v)
    return best_x, best_v
