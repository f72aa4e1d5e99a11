"""Bernoulli demand environment, episode runner and Monte Carlo experiments."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from ._accel import HAS_NUMBA, default_backend
from .demand import Scenario, revenue, require_valid
from .policies import LIKELIHOOD_KINDS, CompiledPolicy, Policy, PolicyKnowledge, PolicySpec, compile_policy

MASK64 = (1 << 64) - 1
BLOCK = 50
CSV_COLUMNS = (
    "policy", "true_model", "t", "mean_regret", "std_regret", "ci_lo", "ci_hi",
    "mean_nonoptimal_pulls", "replications",
)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def stable_hash(*parts: int) -> int:
    """Platform-independent 64-bit seed derived from a tuple of non-negative ints."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = _splitmix64(h ^ (int(p) & MASK64))
    return h


def episode_streams(seed: int):
    """Independent generators for the environment and for policy tie-breaks."""
    env_ss, pol_ss = np.random.SeedSequence(int(seed) & MASK64).spawn(2)
    return np.random.Generator(np.random.PCG64(env_ss)), np.random.Generator(np.random.PCG64(pol_ss))


def default_checkpoints(horizon: int) -> np.ndarray:
    """Every step up to 100, then 50 log-spaced steps up to the horizon."""
    dense = np.arange(1, min(horizon, 100) + 1)
    if horizon <= 100:
        return dense
    sparse = np.unique(np.round(np.geomspace(100, horizon, 50)).astype(np.int64))
    return np.unique(np.concatenate([dense, sparse, [horizon]]))


def _checkpoints(horizon: int, checkpoints) -> np.ndarray:
    if checkpoints is None:
        return default_checkpoints(horizon)
    ck = np.unique(np.asarray(list(checkpoints), dtype=np.int64))
    ck = ck[(ck >= 1) & (ck <= horizon)]
    return np.unique(np.concatenate([ck, [horizon]]))


@dataclass
class EpisodeResult:
    prices: np.ndarray
    outcomes: np.ndarray
    pseudo_regret: np.ndarray  # cumulative, pseudo_regret[t-1] after step t
    realized_revenue: float
    nonoptimal_pulls: int
    seed: int
    policy: str = ""
    true_model: int = 0
    final_belief: Optional[float] = None
    checkpoints: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return int(self.prices.shape[0])


def regret_trajectory(episode: EpisodeResult, checkpoints=None) -> list:
    """``[(t, cumulative pseudo-regret after step t), ...]`` at the checkpoints."""
    if checkpoints is None:
        checkpoints = episode.checkpoints
    ck = _checkpoints(episode.horizon, checkpoints)
    return [(int(t), float(episode.pseudo_regret[t - 1])) for t in ck]


@dataclass
class _Accounting:
    gap: np.ndarray  # per candidate price, r_i(p_i*) - r_i(price)
    nonopt: np.ndarray  # per candidate price, 1 when price != p_i*
    rho_true: np.ndarray


def _accounting(compiled: CompiledPolicy, scenario: Scenario, true_index: int) -> _Accounting:
    model = scenario.models[true_index]
    p_star = scenario.optimal_prices[true_index]
    prices = compiled.prices
    gap = revenue(model, p_star) - np.asarray(revenue(model, prices))
    # p_i* is the maximizer up to optimizer precision; keep the per-step gap non-negative
    gap = np.maximum(gap, 0.0)
    nonopt = (prices != p_star).astype(np.int64)
    gap[nonopt == 0] = 0.0
    rho_true = np.clip(np.asarray(model(prices), dtype=float), 0.0, 1.0)
    return _Accounting(gap, nonopt, rho_true)


def _draw(seeds: Sequence[int], horizon: int):
    u_env = np.empty((len(seeds), horizon))
    u_pol = np.empty((len(seeds), horizon, 2))
    for r, s in enumerate(seeds):
        env, pol = episode_streams(s)
        u_env[r] = env.random(horizon)
        u_pol[r] = pol.random((horizon, 2))
    return u_env, u_pol


def simulate_block(compiled: CompiledPolicy, acct: _Accounting, seeds: Sequence[int], horizon: int, backend: Optional[str] = None):
    """Run one episode per seed; returns (price_idx, outcomes, final_belief) arrays."""
    backend = backend or default_backend()
    u_env, u_pol = _draw(seeds, horizon)
    c = compiled
    belief = c.rule == kernels.RULE_BELIEF
    if backend == "numpy":
        if belief:
            idx, y, q = kernels.belief_batch(c.spec.q0, c.rho[0], c.rho[1], *c.hull, acct.rho_true, u_env)
            return idx, y, q
        idx, y, _ = kernels.likelihood_batch(
            c.rule, c.logf, c.arm_idx, c.pair_x, c.eta, c.fixed_idx, acct.rho_true, u_env, u_pol
        )
        return idx, y, np.full(len(seeds), np.nan)
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    if not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    idx = np.empty((len(seeds), horizon), dtype=np.int64)
    y = np.empty((len(seeds), horizon), dtype=np.int8)
    q = np.full(len(seeds), np.nan)
    for r in range(len(seeds)):
        if belief:
            q[r] = kernels.belief_episode(c.spec.q0, c.rho[0], c.rho[1], *c.hull, acct.rho_true, u_env[r], idx[r], y[r])
        else:
            kernels.likelihood_episode(
                c.rule, c.logf, c.arm_idx, c.pair_x, c.eta, c.fixed_idx, acct.rho_true, u_env[r], u_pol[r], idx[r], y[r]
            )
    return idx, y, q


def _compile_for(scenario: Scenario, spec: PolicySpec, true_index: int, knowledge: str = "full_curves") -> CompiledPolicy:
    if spec.kind in LIKELIHOOD_KINDS:
        require_valid(scenario)
    if knowledge == "matrix_only":
        kn = PolicyKnowledge.matrix_only(scenario.optimal_prices, scenario.prob_matrix)
    else:
        kn = PolicyKnowledge.full_curves(scenario)
    return compile_policy(spec, kn, true_index)


def _true_index(scenario: Scenario, true_index: Optional[int]) -> int:
    idx = scenario.true_model_index if true_index is None else true_index
    if idx is None:
        raise ValueError("scenario has no true_model_index; pass one explicitly")
    if not 0 <= idx < scenario.n_models:
        raise ValueError(f"true model index {idx} out of range [0, {scenario.n_models})")
    return int(idx)


def run_episode(
    scenario: Scenario,
    policy_spec: PolicySpec,
    horizon: int,
    seed: int,
    true_index: Optional[int] = None,
    knowledge: str = "full_curves",
    backend: Optional[str] = None,
    checkpoints=None,
) -> EpisodeResult:
    """Simulate one episode of ``horizon`` customers under the scenario's true model."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    true_index = _true_index(scenario, true_index)
    compiled = _compile_for(scenario, policy_spec, true_index, knowledge)
    acct = _accounting(compiled, scenario, true_index)
    idx, y, q = simulate_block(compiled, acct, [seed], horizon, backend)
    return _episode_result(compiled, acct, idx[0], y[0], q[0], seed, true_index, _checkpoints(horizon, checkpoints))


def _episode_result(compiled, acct, idx, y, q, seed, true_index, checkpoints) -> EpisodeResult:
    prices = compiled.prices[idx]
    return EpisodeResult(
        prices=prices,
        outcomes=y.astype(np.int8),
        pseudo_regret=np.cumsum(acct.gap[idx]),
        realized_revenue=float(np.sum(prices * y)),
        nonoptimal_pulls=int(np.sum(acct.nonopt[idx])),
        seed=int(seed),
        policy=compiled.spec.label,
        true_model=true_index,
        final_belief=None if np.isnan(q) else float(q),
        checkpoints=checkpoints,
    )


def run_episode_stepwise(scenario: Scenario, policy_spec: PolicySpec, horizon: int, seed: int, true_index: Optional[int] = None) -> EpisodeResult:
    """Reference runner driving a :class:`Policy` object one step at a time.

    Slow; consumes randomness exactly like :func:`run_episode`.
    """
    true_index = _true_index(scenario, true_index)
    compiled = _compile_for(scenario, policy_spec, true_index)
    acct = _accounting(compiled, scenario, true_index)
    env, pol = episode_streams(seed)
    u_env = env.random(horizon)
    state = Policy(compiled, pol)
    lookup = {float(p): k for k, p in enumerate(compiled.prices)}
    idx = np.empty(horizon, dtype=np.int64)
    y = np.empty(horizon, dtype=np.int8)
    for s in range(horizon):
        price = state.choose_price(s + 1)
        k = lookup[price]
        o = 1 if u_env[s] < acct.rho_true[k] else 0
        state.observe(price, o)
        idx[s], y[s] = k, o
    q = state.q if compiled.rule == kernels.RULE_BELIEF else np.nan
    return _episode_result(compiled, acct, idx, y, q, seed, true_index, default_checkpoints(horizon))


@dataclass
class SeriesStats:
    """Monte Carlo summary for one (policy, true model) pair."""

    policy: str
    policy_index: int
    true_model: int
    checkpoints: np.ndarray
    regret: np.ndarray  # (R, n_checkpoints)
    pulls: np.ndarray  # (R, n_checkpoints)
    realized_revenue: np.ndarray  # (R,)
    final_belief: np.ndarray  # (R,), NaN for non-Bayesian policies
    seeds: np.ndarray

    @property
    def replications(self) -> int:
        return int(self.regret.shape[0])

    @property
    def mean_regret(self) -> np.ndarray:
        return self.regret.mean(axis=0)

    @property
    def std_regret(self) -> np.ndarray:
        if self.replications < 2:
            return np.zeros(self.regret.shape[1])
        return self.regret.std(axis=0, ddof=1)

    @property
    def stderr_regret(self) -> np.ndarray:
        return self.std_regret / math.sqrt(self.replications)

    @property
    def ci(self):
        half = 1.96 * self.stderr_regret
        return self.mean_regret - half, self.mean_regret + half

    @property
    def mean_pulls(self) -> np.ndarray:
        return self.pulls.mean(axis=0)

    @property
    def stderr_pulls(self) -> np.ndarray:
        if self.replications < 2:
            return np.zeros(self.pulls.shape[1])
        return self.pulls.std(axis=0, ddof=1) / math.sqrt(self.replications)

    def at(self, t: int) -> int:
        """Column of checkpoint ``t``."""
        pos = np.flatnonzero(self.checkpoints == t)
        if pos.size == 0:
            raise KeyError(f"step {t} is not a checkpoint")
        return int(pos[0])


@dataclass
class ExperimentResult:
    series: list
    horizon: int
    replications: int
    base_seed: int

    def get(self, policy: str, true_model: int) -> SeriesStats:
        for s in self.series:
            if s.policy == policy and s.true_model == true_model:
                return s
        raise KeyError(f"no series for policy={policy!r}, true_model={true_model}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in self.series:
            lo, hi = s.ci
            mean, std, pulls = s.mean_regret, s.std_regret, s.mean_pulls
            for j, t in enumerate(s.checkpoints):
                writer.writerow([
                    s.policy, s.true_model, int(t), repr(float(mean[j])), repr(float(std[j])),
                    repr(float(lo[j])), repr(float(hi[j])), repr(float(pulls[j])), s.replications,
                ])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _policy_labels(specs: Sequence[PolicySpec]) -> list:
    labels = [s.label for s in specs]
    return [lab if labels.count(lab) == 1 else f"{lab}#{i}" for i, lab in enumerate(labels)]


def run_monte_carlo(
    scenario: Scenario,
    policy_specs: Sequence[PolicySpec],
    horizon: int,
    replications: int,
    base_seed: int = 0,
    workers: int = 1,
    checkpoints=None,
    true_models: Optional[Sequence[int]] = None,
    backend: Optional[str] = None,
) -> ExperimentResult:
    """Average ``replications`` episodes per (policy, true model) pair.

    Episode ``r`` of policy ``p`` under true model ``i`` is seeded with
    ``stable_hash(base_seed, p, i, r)``; work is split into fixed blocks, so
    the result does not depend on ``workers``.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if true_models is None:
        true_models = [scenario.true_model_index] if scenario.true_model_index is not None else range(scenario.n_models)
    true_models = [_true_index(scenario, i) for i in true_models]
    ck = _checkpoints(horizon, checkpoints)
    labels = _policy_labels(policy_specs)

    units = []
    for p, spec in enumerate(policy_specs):
        for i in true_models:
            compiled = _compile_for(scenario, spec, i)
            acct = _accounting(compiled, scenario, i)
            seeds = np.array([stable_hash(base_seed, p, i, r) for r in range(replications)], dtype=np.uint64)
            units.append((p, i, compiled, acct, seeds))

    tasks = []
    for u, (_, _, compiled, acct, seeds) in enumerate(units):
        for start in range(0, replications, BLOCK):
            tasks.append((u, start, compiled, acct, seeds[start:start + BLOCK]))

    def work(task):
        _, _, compiled, acct, seeds = task
        idx, y, q = simulate_block(compiled, acct, [int(s) for s in seeds], horizon, backend)
        regret = np.cumsum(acct.gap[idx], axis=1)[:, ck - 1]
        pulls = np.cumsum(acct.nonopt[idx], axis=1)[:, ck - 1]
        realized = np.sum(compiled.prices[idx] * y, axis=1)
        return regret, pulls, realized, q

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(work, tasks))
    else:
        outputs = [work(t) for t in tasks]

    series = []
    for u, (p, i, compiled, acct, seeds) in enumerate(units):
        parts = [out for task, out in zip(tasks, outputs) if task[0] == u]
        series.append(SeriesStats(
            policy=labels[p],
            policy_index=p,
            true_model=i,
            checkpoints=ck,
            regret=np.concatenate([x[0] for x in parts]),
            pulls=np.concatenate([x[1] for x in parts]),
            realized_revenue=np.concatenate([x[2] for x in parts]),
            final_belief=np.concatenate([x[3] for x in parts]),
            seeds=seeds,
        ))
    return ExperimentResult(series, horizon, replications, int(base_seed))
