"""Hoeffding-type constants capping the expected number of non-optimal prices.

For true model i and competitor h, the per-step log-likelihood ratios
Z = log f_i(y) / f_h(y) are bounded in [m_h, M_h] and have mean at least
a_h + eta (the smallest KL divergence over the prices the policy can
offer). Hoeffding then gives Pr{mean Z < eta} <= exp(-t / C_h) with
C_h = (M_h - m_h)^2 / (2 a_h^2), and summing over t caps the expected
number of wrong decisions by C_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .demand import Scenario, eval_model, require_valid, revenue
from .info import kl_bernoulli
from .policies import ThresholdError, Thresholds, default_thresholds, exploration_prices, PolicyKnowledge


@dataclass(frozen=True)
class PairBound:
    competitor: int
    a: float
    m: float
    M: float
    C: float
    worst_price: float  # price attaining the smallest KL term


@dataclass
class BoundReport:
    policy: str
    true_model: int
    prices: tuple
    pairs: list = field(default_factory=list)
    total_pull_cap: float = 0.0
    sum_pull_cap: float = 0.0
    max_gap: float = 0.0
    regret_cap: float = 0.0

    def pair(self, h: int) -> PairBound:
        for p in self.pairs:
            if p.competitor == h:
                return p
        raise KeyError(h)

    @property
    def C(self) -> float:
        return max(p.C for p in self.pairs)


def log_ratio_values(alpha: float, beta: float):
    """(log f_alpha(0)/f_beta(0), log f_alpha(1)/f_beta(1)) for Bernoulli laws."""
    return math.log1p(-alpha) - math.log1p(-beta), math.log(alpha) - math.log(beta)


def pair_constants(scenario: Scenario, i: int, h: int, prices: Sequence[float], eta: float = 0.0) -> PairBound:
    mi, mh = scenario.models[i], scenario.models[h]
    kls, lows, highs = [], [], []
    for p in prices:
        alpha, beta = eval_model(mi, p), eval_model(mh, p)
        kls.append(kl_bernoulli(alpha, beta))
        z0, z1 = log_ratio_values(alpha, beta)
        lows.append(min(z0, z1))
        highs.append(max(z0, z1))
    j = int(np.argmin(kls))
    a = kls[j] - eta
    if not a > 0:
        raise ThresholdError(f"threshold {eta:.6g} leaves no KL margin against model {h} (a = {a:.6g})")
    m, M = min(lows), max(highs)
    return PairBound(h, a, m, M, (M - m) ** 2 / (2 * a * a), float(prices[j]))


def _finish(report: BoundReport, scenario: Scenario, n_competitors: int) -> BoundReport:
    caps = [p.C for p in report.pairs]
    report.sum_pull_cap = float(sum(caps))
    report.total_pull_cap = float(caps[0]) if n_competitors == 1 else float(n_competitors * max(caps))
    i = report.true_model
    model = scenario.models[i]
    p_star = scenario.optimal_prices[i]
    gaps = [revenue(model, p_star) - revenue(model, p) for p in report.prices if p != p_star]
    report.max_gap = max(0.0, max(gaps)) if gaps else 0.0
    report.regret_cap = report.total_pull_cap * report.max_gap
    return report


def _check_index(scenario: Scenario, true_index: int) -> None:
    if not 0 <= true_index < scenario.n_models:
        raise ValueError(f"true model index {true_index} out of range [0, {scenario.n_models})")


def elrt_bound(scenario: Scenario, true_index: int) -> BoundReport:
    """Constants for the argmax-likelihood policy over the N arm prices."""
    require_valid(scenario)
    _check_index(scenario, true_index)
    prices = tuple(scenario.optimal_prices)
    report = BoundReport("elrt", true_index, prices)
    for h in range(scenario.n_models):
        if h != true_index:
            report.pairs.append(pair_constants(scenario, true_index, h, prices))
    return _finish(report, scenario, scenario.n_models - 1)


def lrt_bound(scenario: Scenario, true_index: int) -> BoundReport:
    if scenario.n_models != 2:
        raise ValueError(f"lrt_bound needs exactly 2 models, got {scenario.n_models}")
    report = elrt_bound(scenario, true_index)
    report.policy = "lrt"
    return report


def xlrt_bound(scenario: Scenario, true_index: int, thresholds: Optional[Thresholds] = None, metric: str = "chernoff") -> BoundReport:
    """Constants for the two-model policy with an exploration price.

    All three prices {p_0*, p_x, p_1*} enter m, M and the KL minimum, and
    the KL minimum is reduced by the threshold guarding the true model.
    """
    if scenario.n_models != 2:
        raise ValueError(f"xlrt_bound needs exactly 2 models, got {scenario.n_models}")
    require_valid(scenario)
    _check_index(scenario, true_index)
    kn = PolicyKnowledge.full_curves(scenario)
    px = exploration_prices(kn, metric)
    if thresholds is None:
        thresholds = default_thresholds(kn, metric=metric, px=px)
    h = 1 - true_index
    eta = thresholds.eta1 if true_index == 1 else thresholds.eta0
    if eta is None:
        eta = float(thresholds.eta_pair[true_index, h])
    prices = (scenario.optimal_prices[0], float(px[0, 1]), scenario.optimal_prices[1])
    report = BoundReport("xlrt", true_index, prices)
    report.pairs.append(pair_constants(scenario, true_index, h, prices, eta))
    return _finish(report, scenario, 1)


def hoeffding_tail(t, C: float):
    """exp(-t / C)."""
    return np.exp(-np.asarray(t, dtype=float) / C)


def bound_table(reports: Sequence[BoundReport]) -> list:
    rows = []
    for rep in reports:
        for p in rep.pairs:
            rows.append({
                "policy": rep.policy,
                "true_model": rep.true_model,
                "competitor": p.competitor,
                "a": p.a,
                "m": p.m,
                "M": p.M,
                "C": p.C,
                "total_pull_cap": rep.total_pull_cap,
                "sum_pull_cap": rep.sum_pull_cap,
                "regret_cap": rep.regret_cap,
            })
    return rows
