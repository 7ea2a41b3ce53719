"""Proportional-fair time-share scheduling over multiple carriers.

Maximizes ``sum_n log(sum_k w[n, k] c[n, k])`` with the weights of every
scheduling group summing to one on each active carrier.  The solver is a
conditional-gradient method on the product of simplices: on every carrier the
linear subproblem picks the user with the largest marginal ``c[n, k] / R[n]``
(the classic PF choice), and weight is moved to it from the support user with
the smallest marginal, with an exact line search along that pairwise
direction.  Transfers are clipped at the simplex boundary, so users that
should not be served on a carrier end up with exactly zero weight.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .radio import LinkRates

RATE_EPS = 1e-6  # bit/s, keeps marginals finite for users with no weight yet
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 2000


class InfeasibleUtilityError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class UtilityValue:
    value: float
    per_user_rates: np.ndarray


@njit(cache=True)
def _pair_block(c, w, active, a, b):
    """Exact maximization of log R_a + log R_b over the weights of users a and b.

    Per-carrier totals ``w[a, k] + w[b, k]`` stay fixed.  The optimum gives a
    the carriers with the largest ratio ``c[a, k] / c[b, k]``, with at most one
    carrier split between the two users.
    """
    m = c.shape[1]
    keys = np.empty(m)
    for k in range(m):
        if active[k] and w[a, k] + w[b, k] > 0.0:
            if c[b, k] > 0.0:
                keys[k] = c[a, k] / c[b, k]
            else:
                keys[k] = np.inf
        else:
            keys[k] = -1.0
    order = np.argsort(-keys)
    cnt = 0
    for k in range(m):
        if keys[k] >= 0.0:
            cnt += 1
    if cnt == 0:
        return
    best_val = -np.inf
    best_j = 0
    best_x = 0.0
    for j in range(cnt):
        A0 = 0.0
        B0 = 0.0
        for i in range(cnt):
            k = order[i]
            s = w[a, k] + w[b, k]
            if i < j:
                A0 += c[a, k] * s
            elif i > j:
                B0 += c[b, k] * s
        kj = order[j]
        sj = w[a, kj] + w[b, kj]
        ca = c[a, kj]
        cb = c[b, kj]
        if ca <= 0.0:
            x = 0.0
        elif cb <= 0.0:
            x = sj
        else:
            x = ((B0 + cb * sj) * ca - cb * A0) / (2.0 * ca * cb)
            if x < 0.0:
                x = 0.0
            elif x > sj:
                x = sj
        ra = A0 + ca * x
        rb = B0 + cb * (sj - x)
        if ra <= 0.0 or rb <= 0.0:
            continue
        val = np.log(ra) + np.log(rb)
        if val > best_val:
            best_val = val
            best_j = j
            best_x = x
    if best_val == -np.inf:
        return
    for i in range(cnt):
        k = order[i]
        s = w[a, k] + w[b, k]
        if i < best_j:
            w[a, k] = s
            w[b, k] = 0.0
        elif i > best_j:
            w[a, k] = 0.0
            w[b, k] = s
        else:
            w[a, k] = best_x
            w[b, k] = s - best_x


@njit(cache=True)
def _solve(c, active, group, n_groups, tol, max_iters):
    n, m = c.shape
    w = np.zeros((n, m))
    size = np.zeros(n_groups)
    for u in range(n):
        size[group[u]] += 1.0
    for u in range(n):
        for k in range(m):
            if active[k]:
                w[u, k] = 1.0 / size[group[u]]
    R = np.zeros(n)
    for u in range(n):
        for k in range(m):
            R[u] += w[u, k] * c[u, k]

    gap = np.inf
    it = 0
    while it < max_iters:
        it += 1
        gap = 0.0
        for k in range(m):
            if not active[k]:
                continue
            for g in range(n_groups):
                # PF choice on carrier k versus the weakest user currently served on it
                best = -1
                best_v = -1.0
                worst = -1
                worst_v = np.inf
                for u in range(n):
                    if group[u] != g:
                        continue
                    v = c[u, k] / (R[u] + RATE_EPS)
                    if v > best_v:
                        best_v = v
                        best = u
                    if w[u, k] > 0.0 and v < worst_v:
                        worst_v = v
                        worst = u
                if best < 0 or worst < 0 or best == worst or best_v <= 0.0:
                    continue
                rel = (best_v - worst_v) / best_v
                if rel > gap:
                    gap = rel
                if rel < tol:
                    continue
                _pair_block(c, w, active, best, worst)
                R[best] = 0.0
                R[worst] = 0.0
                for j in range(m):
                    R[best] += w[best, j] * c[best, j]
                    R[worst] += w[worst, j] * c[worst, j]
        if gap < tol:
            break
    return w, R, it, gap


def _group_index(groups, n: int):
    if groups is None:
        return np.zeros(n, dtype=np.int64), 1
    uniq, inv = np.unique(np.asarray(groups), return_inverse=True)
    return inv.astype(np.int64), len(uniq)


def _check_servable(c: np.ndarray, active: np.ndarray):
    reachable = (c[:, active] > 0).any(axis=1)
    if not reachable.all():
        bad = np.flatnonzero(~reachable).tolist()
        raise InfeasibleUtilityError(f"users {bad} have zero rate on every active carrier")


def optimize_weights(link_rates: LinkRates, groups=None, tolerance: float = DEFAULT_TOL,
                     max_iters: int = DEFAULT_MAX_ITERS):
    """Optimal PF weights and utility for one operator.

    ``groups`` assigns each user to a scheduling group (typically its serving
    BS); ``None`` puts all users in one group.  Returns ``(weights, utility)``.
    If the iteration budget runs out a :class:`ConvergenceWarning` is issued
    and the last iterate is returned.
    """
    c = np.ascontiguousarray(link_rates.c, dtype=float)
    active = np.asarray(link_rates.active, dtype=bool)
    n = c.shape[0]
    if n == 0:
        return np.zeros_like(c), UtilityValue(0.0, np.zeros(0))
    _check_servable(c, active)
    gidx, n_groups = _group_index(groups, n)
    w, R, _, gap = _solve(c, active, gidx, n_groups, tolerance, max_iters)
    if gap >= tolerance:
        warnings.warn(f"scheduler stopped after {max_iters} iterations with KKT gap {gap:.3g}",
                      ConvergenceWarning, stacklevel=2)
    return w, utility(w, link_rates)


def utility(weights, link_rates: LinkRates) -> UtilityValue:
    rates = (np.asarray(weights) * np.asarray(link_rates.c)).sum(axis=1)
    if rates.size == 0:
        return UtilityValue(0.0, rates)
    if (rates <= 0).any():
        raise InfeasibleUtilityError("a user has zero sum-rate; utility is -inf")
    return UtilityValue(float(np.log(rates).sum()), rates)


def solve_states(c_states: np.ndarray, active_states: np.ndarray, groups=None,
                 tolerance: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS):
    """Optimal utilities and per-user rates for a stack of allocation states.

    ``c_states`` is ``(S, n, K+1)`` for the same users under ``S`` states.
    Returns ``(utilities (S,), rates (S, n))``.
    """
    S, n, _ = c_states.shape
    utilities = np.zeros(S)
    rates = np.zeros((S, n))
    if n == 0:
        return utilities, rates
    gidx, n_groups = _group_index(groups, n)
    for s in range(S):
        c = np.ascontiguousarray(c_states[s])
        _check_servable(c, active_states[s])
        _, R, _, gap = _solve(c, active_states[s], gidx, n_groups, tolerance, max_iters)
        if gap >= tolerance:
            warnings.warn(f"scheduler stopped after {max_iters} iterations with KKT gap "
                          f"{gap:.3g}", ConvergenceWarning, stacklevel=2)
        if (R <= 0).any():
            raise InfeasibleUtilityError("a user has zero sum-rate; utility is -inf")
        utilities[s] = np.log(R).sum()
        rates[s] = R
    return utilities, rates


def kkt_violation(weights: np.ndarray, link_rates: LinkRates, groups=None,
                  support_tol: float = 1e-6) -> float:
    """Largest relative marginal-utility spread per (carrier, group).

    Compares the best marginal ``c/R`` in a group against the smallest
    marginal among users holding more than ``support_tol`` weight.
    """
    c = np.asarray(link_rates.c)
    R = (weights * c).sum(axis=1)
    marg = c / R[:, None]
    gidx, n_groups = _group_index(groups, c.shape[0])
    worst = 0.0
    for k in np.flatnonzero(link_rates.active):
        for g in range(n_groups):
            members = gidx == g
            best = marg[members, k].max()
            supp = members & (weights[:, k] > support_tol)
            if best <= 0 or not supp.any():
                continue
            worst = max(worst, (best - marg[supp, k].min()) / best)
    return worst
