"""Hot per-step loops of the simulator.

Two interchangeable backends share one set of semantics:

* ``numba``: per-episode loops compiled with ``@njit``.
* ``numpy``: the same recursions vectorized across replications, used when
  numba is unavailable or ``DYNPRICE_DISABLE_NUMBA`` is set.

Every random decision consumes pre-drawn uniforms. ``u_env[t]`` decides the
sale outcome, ``u_pol[t, 0]`` and ``u_pol[t, 1]`` break ties inside the
policy, so both backends (and the step-by-step ``Policy`` object) consume
randomness identically.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

RULE_FIXED = 0
RULE_ARGMAX = 1
RULE_TOPTWO = 2
RULE_BELIEF = 3


@njit(cache=True)
def pick_tied(values, exclude, u):
    """Uniformly pick among the indices attaining max(values), skipping ``exclude``.

    The pick is the ``floor(u * count)``-th tied index in ascending order.
    """
    best = -np.inf
    count = 0
    for i in range(values.shape[0]):
        if i == exclude:
            continue
        v = values[i]
        if v > best:
            best = v
            count = 1
        elif v == best:
            count += 1
    j = int(u * count)
    if j >= count:
        j = count - 1
    for i in range(values.shape[0]):
        if i == exclude:
            continue
        if values[i] == best:
            if j == 0:
                return i
            j -= 1
    return -1


@njit(cache=True)
def select_likelihood(rule, loglik, t, arm_idx, pair_x, eta, fixed_idx, u0, u1):
    """Price index chosen at step ``t`` (1-based) from cumulative log-likelihoods."""
    n = loglik.shape[0]
    if rule == RULE_FIXED:
        return fixed_idx
    if t == 1:
        k = int(u0 * n)
        if k >= n:
            k = n - 1
        return arm_idx[k]
    d1 = pick_tied(loglik, -1, u0)
    if rule == RULE_ARGMAX:
        return arm_idx[d1]
    d2 = pick_tied(loglik, d1, u1)
    stat = (loglik[d1] - loglik[d2]) / (t - 1)
    if stat > eta[d1, d2]:
        return arm_idx[d1]
    return pair_x[d1, d2]


@njit(cache=True)
def select_belief(q, hull_idx, hull_m, hull_b, hull_break):
    """Index of the candidate maximizing q r1 + (1 - q) r0, read off the upper envelope."""
    lo = 0
    hi = hull_break.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if hull_break[mid] < q:
            lo = mid + 1
        else:
            hi = mid
    j = lo
    best = j
    best_v = hull_b[j] + q * hull_m[j]
    # exact ties at a breakpoint resolve to the lower price
    for k in (j - 1, j + 1):
        if 0 <= k < hull_idx.shape[0]:
            v = hull_b[k] + q * hull_m[k]
            if v > best_v or (v == best_v and hull_idx[k] < hull_idx[best]):
                best = k
                best_v = v
    return hull_idx[best]


@njit(cache=True)
def belief_update(q, rho0, rho1, y):
    if y == 1:
        f1 = rho1
        f0 = rho0
    else:
        f1 = 1.0 - rho1
        f0 = 1.0 - rho0
    num = q * f1
    return num / (num + (1.0 - q) * f0)


@njit(cache=True, nogil=True)
def likelihood_episode(rule, logf, arm_idx, pair_x, eta, fixed_idx, rho_true, u_env, u_pol, out_idx, out_y):
    n = logf.shape[0]
    loglik = np.zeros(n)
    for s in range(out_idx.shape[0]):
        k = select_likelihood(rule, loglik, s + 1, arm_idx, pair_x, eta, fixed_idx, u_pol[s, 0], u_pol[s, 1])
        y = 1 if u_env[s] < rho_true[k] else 0
        for i in range(n):
            loglik[i] += logf[i, k, y]
        out_idx[s] = k
        out_y[s] = y
    return loglik


@njit(cache=True, nogil=True)
def belief_episode(q0, rho0, rho1, hull_idx, hull_m, hull_b, hull_break, rho_true, u_env, out_idx, out_y):
    q = q0
    for s in range(out_idx.shape[0]):
        k = select_belief(q, hull_idx, hull_m, hull_b, hull_break)
        y = 1 if u_env[s] < rho_true[k] else 0
        q = belief_update(q, rho0[k], rho1[k], y)
        out_idx[s] = k
        out_y[s] = y
    return q


# --- numpy backend: one row per replication ---------------------------------


def _pick_tied_rows(values, exclude, u):
    """Row-wise version of ``pick_tied``; ``exclude`` is an index per row or None."""
    vals = values.copy()
    if exclude is not None:
        vals[np.arange(vals.shape[0]), exclude] = -np.inf
    best = vals.max(axis=1)
    tied = vals == best[:, None]
    count = tied.sum(axis=1)
    j = np.minimum((u * count).astype(np.int64), count - 1)
    rank = np.cumsum(tied, axis=1) - 1
    return np.argmax(tied & (rank == j[:, None]), axis=1)


def likelihood_batch(rule, logf, arm_idx, pair_x, eta, fixed_idx, rho_true, u_env, u_pol):
    """Run ``u_env.shape[0]`` episodes side by side; returns (idx, y, loglik)."""
    reps, horizon = u_env.shape
    n = logf.shape[0]
    loglik = np.zeros((reps, n))
    out_idx = np.empty((reps, horizon), dtype=np.int64)
    out_y = np.empty((reps, horizon), dtype=np.int8)
    rows = np.arange(reps)
    for s in range(horizon):
        t = s + 1
        if rule == RULE_FIXED:
            k = np.full(reps, fixed_idx, dtype=np.int64)
        elif t == 1:
            k = arm_idx[np.minimum((u_pol[:, s, 0] * n).astype(np.int64), n - 1)]
        else:
            d1 = _pick_tied_rows(loglik, None, u_pol[:, s, 0])
            if rule == RULE_ARGMAX:
                k = arm_idx[d1]
            else:
                d2 = _pick_tied_rows(loglik, d1, u_pol[:, s, 1])
                stat = (loglik[rows, d1] - loglik[rows, d2]) / (t - 1)
                k = np.where(stat > eta[d1, d2], arm_idx[d1], pair_x[d1, d2])
        y = (u_env[:, s] < rho_true[k]).astype(np.int8)
        loglik += logf[:, k, y].T
        out_idx[:, s] = k
        out_y[:, s] = y
    return out_idx, out_y, loglik


def belief_batch(q0, rho0, rho1, hull_idx, hull_m, hull_b, hull_break, rho_true, u_env):
    reps, horizon = u_env.shape
    q = np.full(reps, float(q0))
    out_idx = np.empty((reps, horizon), dtype=np.int64)
    out_y = np.empty((reps, horizon), dtype=np.int8)
    h = hull_idx.shape[0]
    for s in range(horizon):
        j = np.searchsorted(hull_break, q, side="left")
        best = j.copy()
        best_v = hull_b[j] + q * hull_m[j]
        for off in (-1, 1):
            k = j + off
            ok = (k >= 0) & (k < h)
            kc = np.clip(k, 0, h - 1)
            v = hull_b[kc] + q * hull_m[kc]
            better = ok & ((v > best_v) | ((v == best_v) & (hull_idx[kc] < hull_idx[best])))
            best = np.where(better, kc, best)
            best_v = np.where(better, v, best_v)
        k = hull_idx[best]
        y = (u_env[:, s] < rho_true[k]).astype(np.int8)
        r1 = np.where(y == 1, rho1[k], 1.0 - rho1[k])
        r0 = np.where(y == 1, rho0[k], 1.0 - rho0[k])
        num = q * r1
        q = num / (num + (1.0 - q) * r0)
        out_idx[:, s] = k
        out_y[:, s] = y
    return out_idx, out_y, q
