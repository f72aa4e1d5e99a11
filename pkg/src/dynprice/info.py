"""KL divergence and Chernoff distance between Bernoulli laws, and exploration prices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import EPS, DemandModel, eval_model
from .optimize import GridConfig, golden_section_max, grid_maximize

T_TOL = 1e-10
METRICS = ("chernoff", "harmonic")


@dataclass(frozen=True)
class ChernoffResult:
    distance: float
    t_star: float


def _clamp(x):
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def kl_bernoulli(alpha, beta):
    """I(alpha || beta) in nats. Works elementwise on arrays."""
    a, b = _clamp(alpha), _clamp(beta)
    val = a * np.log(a / b) + (1.0 - a) * np.log((1.0 - a) / (1.0 - b))
    return _out(np.maximum(val, 0.0))


def neg_log_mu(t, alpha, beta):
    """-log of sum_x f_alpha(x)^(1-t) f_beta(x)^t for Bernoulli laws."""
    a, b = _clamp(alpha), _clamp(beta)
    t = np.asarray(t, dtype=float)
    lo = (1.0 - t) * np.log1p(-a) + t * np.log1p(-b)
    hi = (1.0 - t) * np.log(a) + t * np.log(b)
    return -np.logaddexp(lo, hi)


def chernoff_arrays(alpha, beta, tol: float = T_TOL):
    """Vectorized Chernoff distance; returns ``(distance, t_star)`` arrays."""
    a, b = np.broadcast_arrays(_clamp(alpha), _clamp(beta))
    a, b = a.astype(float), b.astype(float)
    t, d = golden_section_max(lambda s: neg_log_mu(s, a, b), np.zeros(a.shape), np.ones(a.shape), tol)
    same = a == b
    d = np.where(same, 0.0, np.maximum(d, 0.0))
    t = np.where(same, 0.5, t)
    return d, t


def chernoff_bernoulli(alpha: float, beta: float, tol: float = T_TOL) -> ChernoffResult:
    """Chernoff distance max_t -log mu(t) between Bernoulli(alpha) and Bernoulli(beta).

    -log mu is concave in t, so golden-section search on [0, 1] converges to
    the global maximum.
    """
    d, t = chernoff_arrays(alpha, beta, tol)
    return ChernoffResult(float(d), float(t))


def chernoff_harmonic_approx(alpha, beta):
    """Harmonic combination 1 / (1/I(a||b) + 1/I(b||a)); zero when the laws coincide."""
    i1 = np.asarray(kl_bernoulli(alpha, beta))
    i2 = np.asarray(kl_bernoulli(beta, alpha))
    s = i1 + i2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(s > 0, i1 * i2 / np.where(s > 0, s, 1.0), 0.0)
    return _out(val)


def distance(alpha, beta, metric: str = "chernoff"):
    if metric == "chernoff":
        return _out(chernoff_arrays(alpha, beta)[0])
    if metric == "harmonic":
        return chernoff_harmonic_approx(alpha, beta)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def exploration_price(
    model_i: DemandModel,
    model_h: DemandModel,
    interval: tuple,
    grid: GridConfig = GridConfig(),
    metric: str = "chernoff",
) -> float:
    """Price in ``interval`` where the two models' sale outcomes are most distinguishable."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")

    def objective(p):
        return distance(eval_model(model_i, p), eval_model(model_h, p), metric)

    p, _ = grid_maximize(objective, float(interval[0]), float(interval[1]), grid)
    return p
