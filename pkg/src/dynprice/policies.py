"""Pricing policies: likelihood-ratio family, myopic Bayesian baselines and an oracle.

Every policy is compiled into a finite table of candidate prices plus the
arrays the step kernels in :mod:`dynprice.kernels` need. The ``Policy``
object below steps that table one observation at a time; the simulator
runs the same tables through the compiled loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .demand import EPS, DemandModel, Scenario, eval_model, require_valid
from .info import METRICS, exploration_price, kl_bernoulli
from .optimize import GridConfig

KINDS = ("lrt", "xlrt", "elrt", "exlrt", "mbp", "cmbp", "oracle", "fixed")
LIKELIHOOD_KINDS = ("lrt", "xlrt", "elrt", "exlrt")
BAYES_KINDS = ("mbp", "cmbp")
NEEDS_CURVES = ("xlrt", "exlrt", "mbp", "cmbp")


class KnowledgeError(ValueError):
    pass


class ThresholdError(ValueError):
    pass


class UnknownPriceError(KeyError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    kappa: float = 0.5
    eta0: Optional[float] = None
    eta1: Optional[float] = None
    eta_pair: Optional[np.ndarray] = None
    delta: float = 0.05
    q0: float = 0.5
    metric: str = "chernoff"
    arm: Optional[int] = None  # only for kind="fixed"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 <= self.q0 <= 1.0:
            raise ValueError(f"q0 must lie in [0, 1], got {self.q0}")
        if not self.delta >= 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed{self.arm}"
        return self.kind


@dataclass(frozen=True)
class PolicyKnowledge:
    """What the seller knows: either the arm matrix only or the full curves."""

    mode: str
    optimal_prices: tuple
    prob_matrix: np.ndarray  # [i, k] = rho_i(p_k*)
    models: Optional[tuple] = None
    interval: Optional[tuple] = None
    grid: GridConfig = field(default_factory=GridConfig)

    @classmethod
    def matrix_only(cls, optimal_prices, prob_matrix) -> "PolicyKnowledge":
        mat = np.clip(np.asarray(prob_matrix, dtype=float), EPS, 1.0 - EPS)
        n = len(optimal_prices)
        if mat.shape != (n, n):
            raise ValueError(f"prob_matrix must be {n}x{n}, got {mat.shape}")
        return cls("matrix_only", tuple(float(p) for p in optimal_prices), mat)

    @classmethod
    def full_curves(cls, scenario: Scenario) -> "PolicyKnowledge":
        return cls(
            "full_curves", scenario.optimal_prices, scenario.prob_matrix,
            scenario.models, scenario.interval, scenario.grid,
        )

    @property
    def n_models(self) -> int:
        return len(self.optimal_prices)


@dataclass(frozen=True)
class Thresholds:
    eta0: Optional[float]
    eta1: Optional[float]
    eta_pair: np.ndarray  # eta_pair[d1, d2] used when d1 leads d2


def _kl_bound_matrix(knowledge: PolicyKnowledge, px: np.ndarray) -> np.ndarray:
    """bound[d1, d2] = min KL(rho_d1 || rho_d2) over {p_d1*, p_x^(d1,d2), p_d2*}."""
    n = knowledge.n_models
    models = knowledge.models
    bound = np.zeros((n, n))
    for d1 in range(n):
        for d2 in range(n):
            if d1 == d2:
                continue
            prices = (knowledge.optimal_prices[d1], px[d1, d2], knowledge.optimal_prices[d2])
            bound[d1, d2] = min(
                kl_bernoulli(eval_model(models[d1], p), eval_model(models[d2], p)) for p in prices
            )
    return bound


def exploration_prices(knowledge: PolicyKnowledge, metric: str = "chernoff") -> np.ndarray:
    """Symmetric matrix of pairwise exploration prices (diagonal is NaN)."""
    if knowledge.mode != "full_curves":
        raise KnowledgeError("full curves required to compute exploration prices")
    n = knowledge.n_models
    px = np.full((n, n), np.nan)
    for i in range(n):
        for h in range(i + 1, n):
            p = exploration_price(knowledge.models[i], knowledge.models[h], knowledge.interval, knowledge.grid, metric)
            px[i, h] = px[h, i] = p
    return px


def default_thresholds(scenario, kappa: float = 0.5, metric: str = "chernoff", px=None) -> Thresholds:
    """Thresholds at fraction ``kappa`` of the KL minima they must stay below."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    knowledge = scenario if isinstance(scenario, PolicyKnowledge) else _validated_curves(scenario)
    if px is None:
        px = exploration_prices(knowledge, metric)
    pair = kappa * _kl_bound_matrix(knowledge, px)
    if knowledge.n_models == 2:
        return Thresholds(eta0=float(pair[0, 1]), eta1=float(pair[1, 0]), eta_pair=pair)
    return Thresholds(eta0=None, eta1=None, eta_pair=pair)


def _validated_curves(scenario: Scenario) -> PolicyKnowledge:
    require_valid(scenario)
    return PolicyKnowledge.full_curves(scenario)


def check_thresholds(eta_pair: np.ndarray, bound: np.ndarray) -> None:
    n = bound.shape[0]
    for d1 in range(n):
        for d2 in range(n):
            if d1 == d2:
                continue
            eta = eta_pair[d1, d2]
            if n == 2:
                name = "eta1" if d1 == 1 else "eta0"
            else:
                name = f"eta[{d1},{d2}]"
            if not 0.0 <= eta < bound[d1, d2]:
                raise ThresholdError(
                    f"{name} = {eta:.6g} violates 0 <= {name} < min KL bound {bound[d1, d2]:.6g}"
                )


def _upper_envelope(slope: np.ndarray, intercept: np.ndarray):
    """Upper envelope on q in [0, 1] of lines intercept[k] + q * slope[k].

    Candidates are assumed sorted by price, so among identical lines the
    lowest index (price) is kept. Returns (index, slope, intercept, breaks)
    with ``breaks[j]`` the q where segment j hands over to segment j + 1.
    """
    order = np.lexsort((np.arange(slope.size), -intercept, slope))
    hull = []
    last_m = None
    for k in order:
        m, b = slope[k], intercept[k]
        if last_m is not None and m == last_m:
            continue  # same slope, lower (or equal, higher-priced) intercept
        last_m = m
        while len(hull) >= 2:
            k1, k2 = hull[-2], hull[-1]
            m1, b1 = slope[k1], intercept[k1]
            m2, b2 = slope[k2], intercept[k2]
            # k2 is redundant when k reaches k1 no later than k2 does
            if (b - b1) * (m2 - m1) >= (b2 - b1) * (m - m1):
                hull.pop()
            else:
                break
        hull.append(k)
    idx = np.array(hull, dtype=np.int64)
    m = slope[idx]
    b = intercept[idx]
    breaks = (b[:-1] - b[1:]) / (m[1:] - m[:-1])
    # drop segments lying entirely outside [0, 1]
    keep_lo = int(np.searchsorted(breaks, 0.0, side="right"))
    keep_hi = int(np.searchsorted(breaks, 1.0, side="left")) + 1
    sl = slice(keep_lo, keep_hi)
    return idx[sl], m[sl], b[sl], breaks[keep_lo:keep_hi - 1]


@dataclass
class CompiledPolicy:
    """Finite decision table for one policy on one hypothesis set."""

    spec: PolicySpec
    rule: int
    prices: np.ndarray
    rho: np.ndarray  # rho[i, k] = rho_i(prices[k]), clamped
    logf: np.ndarray  # logf[i, k, y]
    arm_idx: np.ndarray
    pair_x: np.ndarray
    eta: np.ndarray
    fixed_idx: int = -1
    hull: tuple = ()
    thresholds: Optional[Thresholds] = None
    exploration: Optional[np.ndarray] = None
    knowledge: Optional[PolicyKnowledge] = None

    @property
    def n_models(self) -> int:
        return self.rho.shape[0]


def _loglik_table(rho: np.ndarray) -> np.ndarray:
    return np.stack([np.log1p(-rho), np.log(rho)], axis=-1)


def compile_policy(spec: PolicySpec, knowledge: PolicyKnowledge, true_index: Optional[int] = None) -> CompiledPolicy:
    """Validate ``spec`` against ``knowledge`` and build its decision table."""
    n = knowledge.n_models
    kind = spec.kind
    if kind in NEEDS_CURVES and knowledge.mode != "full_curves":
        raise KnowledgeError(f"{kind} policy: full curves required (got {knowledge.mode} knowledge)")
    if kind in ("lrt", "xlrt", "mbp", "cmbp") and n != 2:
        raise ValueError(f"{kind} policy handles exactly 2 demand models, got {n}")

    arm_prices = np.array(knowledge.optimal_prices, dtype=float)
    empty_pair = np.full((n, n), -1, dtype=np.int64)
    zero_eta = np.zeros((n, n))

    if kind in ("oracle", "fixed"):
        arm = true_index if kind == "oracle" else spec.arm
        if arm is None or not 0 <= arm < n:
            raise ValueError(f"{kind} policy needs an arm index in [0, {n}), got {arm}")
        rho = np.clip(np.asarray(knowledge.prob_matrix, dtype=float), EPS, 1.0 - EPS)
        return CompiledPolicy(
            spec, kernels.RULE_FIXED, arm_prices, rho, _loglik_table(rho),
            np.arange(n, dtype=np.int64), empty_pair, zero_eta, fixed_idx=int(arm), knowledge=knowledge,
        )

    if kind in ("lrt", "elrt"):
        rho = np.clip(np.asarray(knowledge.prob_matrix, dtype=float), EPS, 1.0 - EPS)
        return CompiledPolicy(
            spec, kernels.RULE_ARGMAX, arm_prices, rho, _loglik_table(rho),
            np.arange(n, dtype=np.int64), empty_pair, zero_eta, knowledge=knowledge,
        )

    models = knowledge.models
    if kind in ("xlrt", "exlrt"):
        px = exploration_prices(knowledge, spec.metric)
        bound = _kl_bound_matrix(knowledge, px)
        eta = _resolve_thresholds(spec, bound, n)
        check_thresholds(eta, bound)
        extra = sorted({float(px[i, h]) for i in range(n) for h in range(i + 1, n)} - set(arm_prices.tolist()))
        prices = np.concatenate([arm_prices, np.array(extra, dtype=float)])
        lookup = {float(p): k for k, p in enumerate(prices)}
        pair_x = empty_pair.copy()
        for i in range(n):
            for h in range(n):
                if i != h:
                    pair_x[i, h] = lookup[float(px[i, h])]
        rho = np.array([[eval_model(m, p) for p in prices] for m in models])
        thresholds = Thresholds(
            eta0=float(eta[0, 1]) if n == 2 else None,
            eta1=float(eta[1, 0]) if n == 2 else None,
            eta_pair=eta,
        )
        return CompiledPolicy(
            spec, kernels.RULE_TOPTWO, prices, rho, _loglik_table(rho),
            np.arange(n, dtype=np.int64), pair_x, eta, thresholds=thresholds, exploration=px,
            knowledge=knowledge,
        )

    # myopic Bayesian policies search the price grid plus the arm prices
    lo, hi = knowledge.interval
    prices = np.union1d(np.linspace(lo, hi, knowledge.grid.points), arm_prices)
    rho = np.array([np.asarray(eval_model(m, prices)) for m in models])
    if kind == "cmbp":
        allowed = np.abs(rho[0] - rho[1]) > spec.delta
        if not allowed.any():
            raise ValueError(f"cmbp: no grid price separates the models by more than delta={spec.delta}")
        prices, rho = prices[allowed], rho[:, allowed]
    r0, r1 = prices * rho[0], prices * rho[1]
    hull = _upper_envelope(r1 - r0, r0)
    return CompiledPolicy(
        spec, kernels.RULE_BELIEF, prices, rho, _loglik_table(rho),
        np.zeros(0, dtype=np.int64), empty_pair, zero_eta, hull=hull, knowledge=knowledge,
    )


def _resolve_thresholds(spec: PolicySpec, bound: np.ndarray, n: int) -> np.ndarray:
    eta = spec.kappa * bound
    if spec.eta_pair is not None:
        explicit = np.asarray(spec.eta_pair, dtype=float)
        if explicit.shape != (n, n):
            raise ThresholdError(f"eta_pair must be {n}x{n}, got {explicit.shape}")
        eta = explicit.copy()
        np.fill_diagonal(eta, 0.0)
    if n == 2:
        if spec.eta0 is not None:
            eta[0, 1] = spec.eta0
        if spec.eta1 is not None:
            eta[1, 0] = spec.eta1
    elif spec.eta0 is not None or spec.eta1 is not None:
        raise ThresholdError("eta0/eta1 apply to two-model policies only; use eta_pair")
    return eta


class Policy:
    """Single-episode policy state.

    Likelihood policies keep cumulative log-likelihoods ``loglik``;
    Bayesian policies keep the belief ``q`` that model 1 is in force.
    """

    def __init__(self, compiled: CompiledPolicy, rng: np.random.Generator):
        self.compiled = compiled
        self.rng = rng
        self.t = 0
        self.loglik = np.zeros(compiled.n_models)
        self.q = compiled.spec.q0
        self.last_action: Optional[int] = None
        self._lookup = {float(p): k for k, p in enumerate(compiled.prices)}

    @property
    def kind(self) -> str:
        return self.compiled.spec.kind

    def statistic(self, i: int = 1, h: int = 0) -> float:
        """Time-averaged log-likelihood ratio L_{i,h} over the steps observed so far."""
        if self.t == 0:
            return 0.0
        return float((self.loglik[i] - self.loglik[h]) / self.t)

    def choose_price(self, t: Optional[int] = None) -> float:
        c = self.compiled
        t = self.t + 1 if t is None else int(t)
        if t < 1:
            raise ValueError(f"step must be >= 1, got {t}")
        u = self.rng.random(2)
        if c.rule == kernels.RULE_BELIEF:
            k = kernels.select_belief(self.q, *c.hull)
        else:
            k = kernels.select_likelihood(
                c.rule, self.loglik, t, c.arm_idx, c.pair_x, c.eta, c.fixed_idx, u[0], u[1]
            )
        self.last_action = int(k)
        return float(c.prices[k])

    def _column(self, price: float):
        """(rho_i(price), log f_i(0), log f_i(1)) for every model i."""
        c = self.compiled
        k = self._lookup.get(float(price))
        if k is not None:
            return c.rho[:, k], c.logf[:, k, :]
        kn = c.knowledge
        if kn is None or kn.mode != "full_curves":
            raise UnknownPriceError(f"price {price!r} has no likelihood entry under matrix-only knowledge")
        rho = np.array([eval_model(m, price) for m in kn.models])
        return rho, _loglik_table(rho)

    def observe(self, price: float, outcome: int) -> "Policy":
        if outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
        rho, logf = self._column(price)
        if self.compiled.rule == kernels.RULE_BELIEF:
            self.q = float(kernels.belief_update(self.q, rho[0], rho[1], outcome))
        else:
            self.loglik = self.loglik + logf[:, outcome]
        self.t += 1
        return self


def policy_init(
    spec: PolicySpec,
    knowledge: PolicyKnowledge,
    rng: np.random.Generator,
    true_index: Optional[int] = None,
) -> Policy:
    return Policy(compile_policy(spec, knowledge, true_index), rng)


def choose_price(state: Policy, t: Optional[int] = None) -> float:
    return state.choose_price(t)


def observe(state: Policy, price: float, outcome: int) -> Policy:
    return state.observe(price, outcome)
