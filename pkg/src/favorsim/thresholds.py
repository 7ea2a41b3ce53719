"""Ask/grant probabilities, excess utility and the threshold solver.

Stores are passed as lists indexed by favor size (``stores[k - 1]``) and only
need ``cdf_at``, ``partial_mean_below`` and ``partial_mean_above``; both
:class:`~favorsim.gainloss.SampleStore` and its interpolated view qualify.
Asking is strict (gain > theta), granting is not (loss <= lambda).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .gainloss import InterpolatedStore, SampleStore


@dataclass
class ThresholdSet:
    theta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.theta.shape != self.lam.shape:
            raise ValueError("theta and lambda must have one entry per favor size")

    @property
    def pool_size(self) -> int:
        return len(self.theta)

    @classmethod
    def no_trade(cls, pool_size: int) -> "ThresholdSet":
        return cls(np.full(pool_size, np.inf), np.zeros(pool_size))

    @classmethod
    def initial(cls, pool_size: int, theta_step: float = 1.5, lam_step: float = 1.0):
        k = np.arange(1, pool_size + 1)
        return cls(theta_step * k, lam_step * k)

    def is_no_trade(self) -> bool:
        return bool(np.all(np.isinf(self.theta)) and np.all(self.lam == 0))

    def as_dict(self) -> dict:
        return {"theta": [float(t) for t in self.theta], "lambda": [float(x) for x in self.lam]}


@dataclass
class OpponentStats:
    p_ask: np.ndarray
    p_grant: np.ndarray
    ask_counts: np.ndarray = None
    grant_counts: np.ndarray = None

    def __post_init__(self):
        self.p_ask = np.asarray(self.p_ask, dtype=float)
        self.p_grant = np.asarray(self.p_grant, dtype=float)
        if np.any(self.p_ask < 0) or np.any(self.p_ask > 1) or self.p_ask.sum() > 1 + 1e-12:
            raise ValueError(f"invalid ask probabilities {self.p_ask}")
        if np.any(self.p_grant < 0) or np.any(self.p_grant > 1):
            raise ValueError(f"invalid grant probabilities {self.p_grant}")


def _no_ask_prob(theta, gain_stores):
    out = 1.0
    for j, g in enumerate(gain_stores):
        out = out * g.cdf_at(theta[j])
    return out


def p_ask(thresholds: ThresholdSet, gain_stores) -> np.ndarray:
    K = len(gain_stores)
    th = thresholds.theta
    out = np.empty(K)
    tail = 1.0  # prob. that no larger favor is asked for
    for k in range(K - 1, -1, -1):
        f = gain_stores[k].cdf_at(th[k])
        out[k] = tail * (1.0 - f)
        tail = tail * f
    return out


def p_grant(thresholds: ThresholdSet, gain_stores, loss_stores) -> np.ndarray:
    idle = _no_ask_prob(thresholds.theta, gain_stores)
    return np.array([idle * loss_stores[k].cdf_at(thresholds.lam[k])
                     for k in range(len(loss_stores))])


def constraint_residual(own_ask, own_grant, opponent: OpponentStats) -> float:
    """Favors taken minus favors given, in expected carriers per stage."""
    k = np.arange(1, len(own_ask) + 1)
    return float(np.sum(k * np.asarray(own_ask) * opponent.p_grant)
                 - np.sum(k * opponent.p_ask * np.asarray(own_grant)))


def excess_utility(thresholds: ThresholdSet, gain_stores, loss_stores,
                   opponent: OpponentStats) -> float:
    th, lam = thresholds.theta, thresholds.lam
    K = len(gain_stores)
    idle = _no_ask_prob(th, gain_stores)
    total = 0.0
    tail = 1.0
    for k in range(K - 1, -1, -1):
        taken = opponent.p_grant[k] * tail * gain_stores[k].partial_mean_above(th[k])
        given = opponent.p_ask[k] * loss_stores[k].partial_mean_below(lam[k]) * idle
        total += taken - given
        tail = tail * gain_stores[k].cdf_at(th[k])
    return float(total)


def check_scaling(thresholds: ThresholdSet) -> bool:
    lam = thresholds.lam
    return bool(np.all(lam == np.arange(1, len(lam) + 1) * lam[0]))


def excess_utility_factored(thresholds: ThresholdSet, gain_stores, loss_stores,
                            opponent: OpponentStats, tolerance: float = 1e-3) -> float:
    """Excess utility in the form obtained after substituting the first-order
    conditions and the reciprocity constraint.

    Each summand is non-negative when ``theta > lambda``.  Only valid for
    thresholds with ``lambda_k = k * lambda_1`` that satisfy the constraint.
    """
    if not check_scaling(thresholds):
        raise ValueError("factored excess utility needs lambda_k = k * lambda_1")
    own_ask = p_ask(thresholds, gain_stores)
    own_grant = p_grant(thresholds, gain_stores, loss_stores)
    res = constraint_residual(own_ask, own_grant, opponent)
    if abs(res) > tolerance:
        raise ValueError(f"factored excess utility needs a satisfied constraint (residual {res:.3g})")
    if thresholds.is_no_trade():
        # outside the stationary family; nothing is ever taken or given
        return 0.0
    th, lam = thresholds.theta, thresholds.lam
    K = len(gain_stores)
    total = 0.0
    tail = 1.0
    for k in range(K - 1, -1, -1):
        g = gain_stores[k]
        f = g.cdf_at(th[k])
        if np.isfinite(th[k]):
            total += opponent.p_grant[k] * tail * (g.partial_mean_above(th[k]) - lam[k] * (1.0 - f))
        tail = tail * f
    total += opponent.p_grant[0] * (th[0] - lam[0]) * tail
    return float(total)


@dataclass(frozen=True)
class SolverConfig:
    resolution: float = 1e-3  # scan step as a fraction of the lambda_1 range
    lam_quantile: float = 0.999
    residual_tol: float = 1e-3
    root_xtol: float = 1e-14
    estimator: str = "interpolated"  # or "empirical"


@dataclass
class Candidate:
    kind: str
    thresholds: ThresholdSet
    excess: float
    residual: float
    feasible: bool

    def as_dict(self) -> dict:
        return {"kind": self.kind, **self.thresholds.as_dict(), "excess_utility": self.excess,
                "residual": self.residual, "feasible": self.feasible}


@dataclass
class SolverReport:
    chosen: Candidate
    candidates: list
    mu: float
    lam1_max: float
    degenerate_from: int | None = None  # smallest favor size without an opponent grant prob.
    estimator: str = "interpolated"
    extra: dict = field(default_factory=dict)

    @property
    def thresholds(self) -> ThresholdSet:
        return self.chosen.thresholds

    @property
    def interior(self) -> bool:
        return self.chosen.kind == "interior"

    def as_dict(self) -> dict:
        return {"chosen": self.chosen.as_dict(), "mu": self.mu, "lam1_max": self.lam1_max,
                "degenerate_from": self.degenerate_from, "estimator": self.estimator,
                "candidates": [c.as_dict() for c in self.candidates], **self.extra}


def _prepare(stores, estimator: str):
    if estimator == "interpolated":
        return [s.interpolated() if isinstance(s, SampleStore) else s for s in stores]
    if estimator == "empirical":
        return list(stores)
    raise ValueError(f"unknown estimator {estimator!r}")


def stationary_thresholds(lam1, gain_stores, loss_stores, opponent: OpponentStats):
    """Thresholds satisfying the first-order conditions for given ``lambda_1`` values.

    ``lam1`` may be an array; returns ``(theta, lam)`` of shape ``(len(lam1), K)``.
    Favor sizes from the first one the opponent never grants onwards get an
    infinite ask threshold.
    """
    lam1 = np.atleast_1d(np.asarray(lam1, dtype=float))
    K = len(gain_stores)
    pa, pg = opponent.p_ask, opponent.p_grant
    lam = lam1[:, None] * np.arange(1, K + 1)[None, :]
    theta = np.full_like(lam, np.inf)
    if pg[0] <= 0:
        return theta, lam
    # explicit form of the theta_1 condition
    slack = sum(pa[j] * (lam[:, j] * loss_stores[j].cdf_at(lam[:, j])
                         - loss_stores[j].partial_mean_below(lam[:, j])) for j in range(K))
    theta[:, 0] = lam[:, 0] + slack / pg[0]
    for k in range(1, K):
        if pg[k] <= 0:
            break
        g = gain_stores[k - 1]
        tp, lp = theta[:, k - 1], lam[:, k - 1]
        f = g.cdf_at(tp)
        bracket = g.partial_mean_above(tp) - lp * (1.0 - f) + (tp - lp) * f
        theta[:, k] = lam[:, k] + pg[k - 1] / pg[k] * bracket
    return theta, lam


def _residuals(theta, lam, gain_stores, loss_stores, opponent):
    K = len(gain_stores)
    kk = np.arange(1, K + 1)
    F = np.stack([gain_stores[j].cdf_at(theta[:, j]) for j in range(K)], axis=1)
    FL = np.stack([loss_stores[j].cdf_at(lam[:, j]) for j in range(K)], axis=1)
    # ask prob. of size k: no larger ask times tail above theta_k
    above = np.cumprod(F[:, ::-1], axis=1)[:, ::-1]
    larger = np.concatenate([above[:, 1:], np.ones((len(F), 1))], axis=1)
    ask = larger * (1.0 - F)
    grant = above[:, :1] * FL
    return (ask * (kk * opponent.p_grant)).sum(axis=1) - (grant * (kk * opponent.p_ask)).sum(axis=1)


def solve_thresholds(gain_stores, loss_stores, opponent: OpponentStats,
                     config: SolverConfig = SolverConfig()) -> SolverReport:
    G = _prepare(gain_stores, config.estimator)
    L = _prepare(loss_stores, config.estimator)
    K = len(G)
    pg = opponent.p_grant
    degenerate = next((k + 1 for k in range(K) if pg[k] <= 0), None)

    no_trade = ThresholdSet.no_trade(K)
    candidates = [Candidate("no_trade", no_trade, 0.0, 0.0, True)]
    lam1_max = float(max(np.quantile(s.sorted_samples(), config.lam_quantile)
                         if isinstance(s, SampleStore) else np.quantile(s.s, config.lam_quantile)
                         for s in loss_stores))
    if lam1_max <= 0:
        lam1_max = 1.0
    if degenerate == 1:
        return SolverReport(candidates[0], candidates, 0.0, lam1_max, degenerate, config.estimator)

    def evaluate(kind, l1):
        theta, lam = stationary_thresholds(l1, G, L, opponent)
        thr = ThresholdSet(theta[0], lam[0])
        res = constraint_residual(p_ask(thr, G), p_grant(thr, G, L), opponent)
        ex = excess_utility(thr, G, L, opponent)
        return Candidate(kind, thr, ex, res, abs(res) <= config.residual_tol)

    def residual(l1):
        theta, lam = stationary_thresholds(l1, G, L, opponent)
        return float(_residuals(theta, lam, G, L, opponent)[0])

    n_scan = int(round(1.0 / config.resolution)) + 1
    grid = np.linspace(0.0, lam1_max, n_scan)
    theta, lam = stationary_thresholds(grid, G, L, opponent)
    res = _residuals(theta, lam, G, L, opponent)

    roots = []
    for i in range(n_scan - 1):
        if res[i] == 0.0:
            roots.append(grid[i])
        elif res[i] * res[i + 1] < 0:
            roots.append(brentq(residual, grid[i], grid[i + 1], xtol=config.root_xtol,
                                rtol=4 * np.finfo(float).eps, maxiter=500))
    if res[-1] == 0.0:
        roots.append(grid[-1])
    for r in roots:
        candidates.append(evaluate("interior", r))
    if not roots:
        candidates.append(evaluate("min_residual", grid[int(np.argmin(np.abs(res)))]))
    candidates.append(evaluate("border_low", 0.0))
    candidates.append(evaluate("border_high", lam1_max))

    feasible = [c for c in candidates if c.feasible]
    chosen = max(feasible, key=lambda c: c.excess)
    mu = float(chosen.thresholds.lam[0])
    return SolverReport(chosen, candidates, mu, lam1_max, degenerate, config.estimator,
                        {"n_roots": len(roots)})
