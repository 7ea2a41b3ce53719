"""Repeated favor-exchange game between the two operators, and the static baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .deployment import OPERATORS, generate_snapshot
from .gainloss import FavorValuation, StoreSet, scheduling_groups
from .params import SimParams
from .radio import state_rates
from .scheduler import solve_states
from .thresholds import (OpponentStats, SolverConfig, ThresholdSet, excess_utility,
                         excess_utility_factored, p_ask, p_grant, solve_thresholds)

log = logging.getLogger(__name__)

INIT_STREAM = 0
GAME_STREAM = 1
DEFAULT_INIT_LOADS = tuple(range(2, 9))


def other(op: str) -> str:
    return OPERATORS[1 - OPERATORS.index(op)]


def stage_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


@dataclass(frozen=True)
class StageAction:
    k: int = 0  # 0 means idle

    @property
    def asks(self) -> bool:
        return self.k > 0

    def __str__(self):
        return f"ask{self.k}" if self.k else "idle"


IDLE = StageAction(0)


@dataclass
class StageOutcome:
    grantor: str | None = None
    taker: str | None = None
    k: int = 0
    utilities: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)

    @property
    def exchange(self) -> bool:
        return self.grantor is not None

    def __str__(self):
        return f"exchange_{self.grantor}to{self.taker}_{self.k}" if self.exchange else "default"


class LazyValuation(FavorValuation):
    """Favor valuation that only solves the allocation states it is asked about."""

    def __init__(self, snapshot, op: str, params: SimParams):
        c, active = state_rates(snapshot, op, params.radio)
        n_states = c.shape[0]
        super().__init__(op, params.pool_size, np.full(n_states, np.nan),
                         np.full((n_states, c.shape[1]), np.nan))
        self._c, self._active = c, active
        self._groups = scheduling_groups(snapshot, op, params)
        self._opts = params.scheduler

    def ensure(self, states):
        todo = [s for s in states if np.isnan(self.utilities[s])]
        if todo:
            u, r = solve_states(self._c[todo], self._active[todo], self._groups,
                                self._opts.tolerance, self._opts.max_iters)
            self.utilities[todo] = u
            self.rates[todo] = r
        return self

    def gain(self, k: int) -> float:
        self.ensure([0, k])
        return super().gain(k)

    def loss(self, k: int) -> float:
        self.ensure([0, self.pool_size + k])
        return super().loss(k)


def decide_action(valuation: FavorValuation, thresholds: ThresholdSet) -> StageAction:
    """Ask for the largest favor whose immediate gain beats its threshold."""
    K = valuation.pool_size
    if isinstance(valuation, LazyValuation):
        valuation.ensure(range(K + 1))
    for k in range(K, 0, -1):
        if valuation.gain(k) > thresholds.theta[k - 1]:
            return StageAction(k)
    return IDLE


def resolve_stage(actions: dict, valuations: dict, thresholds: dict) -> StageOutcome:
    askers = [op for op in OPERATORS if actions[op].asks]
    out = StageOutcome()
    if len(askers) == 1:
        taker = askers[0]
        grantor = other(taker)
        k = actions[taker].k
        if valuations[grantor].loss(k) <= thresholds[grantor].lam[k - 1]:
            out.grantor, out.taker, out.k = grantor, taker, k
    K = valuations["A"].pool_size
    for op in OPERATORS:
        v = valuations[op]
        if not out.exchange:
            state = 0
        elif op == out.taker:
            state = out.k
        else:
            state = K + out.k
        if isinstance(v, LazyValuation):
            v.ensure([state])
        out.utilities[op] = float(v.utilities[state])
        out.rates[op] = v.rates[state]
    return out


@dataclass
class FavorLedger:
    pool_size: int
    stages: int = 0
    taken: dict = field(default_factory=lambda: {op: 0 for op in OPERATORS})
    given: dict = field(default_factory=lambda: {op: 0 for op in OPERATORS})
    asks_made: dict = None
    asks_observed: dict = None
    grants_made: dict = None
    grant_opportunities: dict = None

    def __post_init__(self):
        for name in ("asks_made", "asks_observed", "grants_made", "grant_opportunities"):
            if getattr(self, name) is None:
                setattr(self, name, {op: np.zeros(self.pool_size, dtype=int) for op in OPERATORS})

    def record(self, actions: dict, outcome: StageOutcome):
        self.stages += 1
        for op in OPERATORS:
            a = actions[op]
            if a.asks:
                self.asks_made[op][a.k - 1] += 1
                self.asks_observed[other(op)][a.k - 1] += 1
                if not actions[other(op)].asks:
                    self.grant_opportunities[other(op)][a.k - 1] += 1
        if outcome.exchange:
            self.grants_made[outcome.grantor][outcome.k - 1] += 1
            self.taken[outcome.taker] += outcome.k
            self.given[outcome.grantor] += outcome.k

    def balance(self, op: str) -> int:
        return self.taken[op] - self.given[op]


def estimate_opponent(ledger: FavorLedger, me: str, min_obs: int = 10) -> OpponentStats:
    """Ask/grant probabilities of ``me``'s opponent from the full history.

    Add-one smoothing applies while a denominator is below ``min_obs``; with no
    history this gives ``1/(2K)`` per ask size and ``1/2`` per grant size.
    """
    opp = other(me)
    K = ledger.pool_size
    T = ledger.stages
    asks = ledger.asks_made[opp].astype(float)
    if T < min_obs:
        pa = (asks + 1.0) / (T + 2.0 * K)
    else:
        pa = asks / T
    grants = ledger.grants_made[opp].astype(float)
    chances = ledger.grant_opportunities[opp].astype(float)
    pg = np.where(chances < min_obs, (grants + 1.0) / (chances + 2.0),
                  grants / np.maximum(chances, 1.0))
    return OpponentStats(pa, pg, ledger.asks_made[opp].copy(), ledger.grant_opportunities[opp].copy())


@dataclass
class ScenarioSchedule:
    loads: np.ndarray  # (n_stages, 2) mean users for A and B

    def __post_init__(self):
        self.loads = np.asarray(self.loads, dtype=float).reshape(-1, 2)
        if np.any(self.loads < 0):
            raise ValueError("mean loads must be non-negative")

    def __len__(self):
        return len(self.loads)

    def means(self, stage: int) -> dict:
        return {"A": self.loads[stage, 0], "B": self.loads[stage, 1]}

    @classmethod
    def asymmetric(cls, n_stages: int, high: float = 8, low: float = 2, swap_at: int | None = None):
        swap_at = n_stages // 2 if swap_at is None else swap_at
        loads = np.empty((n_stages, 2))
        loads[:swap_at] = (high, low)
        loads[swap_at:] = (low, high)
        return cls(loads)

    @classmethod
    def equal(cls, n_stages: int, mean: float = 5):
        return cls(np.full((n_stages, 2), float(mean)))


@dataclass
class RateLog:
    stage: np.ndarray
    operator: np.ndarray
    user: np.ndarray
    rate: np.ndarray

    @classmethod
    def from_chunks(cls, chunks) -> "RateLog":
        if not chunks:
            return cls(np.zeros(0, int), np.zeros(0, dtype="<U1"), np.zeros(0, int), np.zeros(0))
        stage, op, user, rate = zip(*chunks)
        return cls(np.concatenate(stage), np.concatenate(op), np.concatenate(user),
                   np.concatenate(rate))

    def rates(self, op: str) -> np.ndarray:
        return self.rate[self.operator == op]

    def __len__(self):
        return len(self.rate)


def _chunk(stage: int, op: str, rates: np.ndarray):
    n = len(rates)
    return (np.full(n, stage), np.full(n, op), np.arange(n), np.asarray(rates, dtype=float))


@dataclass(frozen=True)
class GameConfig:
    update_period: int = 100
    theta_step: float = 1.5  # initial theta_k = theta_step * k
    lam_step: float = 1.0  # initial lambda_k = lam_step * k
    min_obs: int = 10
    solver: SolverConfig = SolverConfig()


@dataclass
class GameResult:
    rates: RateLog
    ledger: FavorLedger
    stage_log: list  # per-stage dicts
    trajectory: list  # (stage, operator, ThresholdSet)
    reports: list  # per-epoch dicts with the solver report


def run_initialization(n_snapshots: int, params: SimParams, seed: int = 0,
                       loads=DEFAULT_INIT_LOADS, start: int = 0) -> StoreSet:
    """Gain and loss samples over snapshots with randomly drawn mean loads.

    Snapshot ``i`` uses its own seed stream, so disjoint index ranges can run
    in separate processes and be merged.
    """
    from .gainloss import evaluate_favors

    stores = StoreSet.empty(params.pool_size)
    loads = np.asarray(loads, dtype=float)
    for i in range(start, start + n_snapshots):
        rng = stage_rng(seed, INIT_STREAM, i)
        means = {op: rng.choice(loads) for op in OPERATORS}
        snap = generate_snapshot(means, params.layout, params.pathloss, rng)
        for op in OPERATORS:
            stores.record(evaluate_favors(snap, op, params))
    return stores


def _snapshot(schedule: ScenarioSchedule, stage: int, params: SimParams, seed: int):
    return generate_snapshot(schedule.means(stage), params.layout, params.pathloss,
                             stage_rng(seed, GAME_STREAM, stage))


def _epoch_report(stage, op, stores: StoreSet, opp: OpponentStats, config: SolverConfig) -> dict:
    gains, losses = stores.gains(op), stores.losses(op)
    report = solve_thresholds(gains, losses, opp, config)
    thr = report.thresholds
    entry = {"stage": stage, "operator": op, "opponent_p_ask": opp.p_ask.tolist(),
             "opponent_p_grant": opp.p_grant.tolist(), **report.as_dict()}
    if report.interior:
        view = [s.interpolated() for s in gains] if config.estimator == "interpolated" else gains
        lview = [s.interpolated() for s in losses] if config.estimator == "interpolated" else losses
        entry["excess_utility_factored"] = excess_utility_factored(
            thr, view, lview, opp, config.residual_tol)
        entry["own_p_ask"] = p_ask(thr, view).tolist()
        entry["own_p_grant"] = p_grant(thr, view, lview).tolist()
        entry["excess_utility_check"] = excess_utility(thr, view, lview, opp)
    return report, entry


def run_game(schedule: ScenarioSchedule, stores: StoreSet, params: SimParams,
             config: GameConfig = GameConfig(), seed: int = 0) -> GameResult:
    K = params.pool_size
    thresholds = {op: ThresholdSet.initial(K, config.theta_step, config.lam_step)
                  for op in OPERATORS}
    ledger = FavorLedger(K)
    chunks, stage_log, reports = [], [], []
    trajectory = [(0, op, thresholds[op]) for op in OPERATORS]

    for stage in range(len(schedule)):
        snap = _snapshot(schedule, stage, params, seed)
        vals = {op: LazyValuation(snap, op, params) for op in OPERATORS}
        actions = {op: decide_action(vals[op], thresholds[op]) for op in OPERATORS}
        outcome = resolve_stage(actions, vals, thresholds)
        ledger.record(actions, outcome)
        for op in OPERATORS:
            chunks.append(_chunk(stage, op, outcome.rates[op]))
        stage_log.append({
            "stage": stage, "n_A": snap.n_users("A"), "n_B": snap.n_users("B"),
            "action_A": str(actions["A"]), "action_B": str(actions["B"]),
            "outcome": "exchange" if outcome.exchange else "default",
            "grantor": outcome.grantor or "", "k": outcome.k,
            "taken_A": ledger.taken["A"], "given_A": ledger.given["A"],
            "taken_B": ledger.taken["B"], "given_B": ledger.given["B"],
        })

        if (stage + 1) % config.update_period == 0 and stage + 1 < len(schedule):
            for op in OPERATORS:
                opp = estimate_opponent(ledger, op, config.min_obs)
                report, entry = _epoch_report(stage + 1, op, stores, opp, config.solver)
                thresholds[op] = report.thresholds
                reports.append(entry)
                trajectory.append((stage + 1, op, report.thresholds))
            log.debug("stage %d: thresholds %s", stage + 1,
                      {op: thresholds[op].as_dict() for op in OPERATORS})

    return GameResult(RateLog.from_chunks(chunks), ledger, stage_log, trajectory, reports)


def run_baseline(schedule: ScenarioSchedule, params: SimParams, seed: int = 0) -> RateLog:
    """Static allocation: both operators always use the whole pool.

    This is the one-shot equilibrium outcome (always ask, never grant), so no
    favor is ever exchanged.
    """
    chunks = []
    for stage in range(len(schedule)):
        snap = _snapshot(schedule, stage, params, seed)
        for op in OPERATORS:
            v = LazyValuation(snap, op, params).ensure([0])
            chunks.append(_chunk(stage, op, v.rates[0]))
    return RateLog.from_chunks(chunks)
