"""Downlink SINR and full-occupancy link rates per user and carrier.

Carrier indexing: ``0..K-1`` are the pool carriers, ``K`` is the operator's
dedicated carrier.  All quantities are linear; dB appears only in
:class:`RadioParams` fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deployment import OPERATORS, InvalidParameterError, NetworkSnapshot


class InvalidQueryError(ValueError):
    pass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float = 20.0
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 10.0
    cc_bandwidth: float = 20e6
    sinr_efficiency: float = 2.0
    pool_size: int = 2

    def __post_init__(self):
        if self.cc_bandwidth <= 0 or self.sinr_efficiency <= 0:
            raise InvalidParameterError("bandwidth and SINR efficiency must be positive")
        if self.pool_size < 1:
            raise InvalidParameterError("pool_size must be at least 1")

    @property
    def tx_power(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def n_carriers(self) -> int:
        return self.pool_size + 1

    @property
    def dedicated(self) -> int:
        return self.pool_size


def noise_power_per_cc(params: RadioParams) -> float:
    dbm = (params.noise_density_dbm_hz + 10.0 * np.log10(params.cc_bandwidth)
           + params.noise_figure_db)
    return dbm_to_watt(dbm)


@dataclass(frozen=True)
class AllocationState:
    """Pool carriers each operator transmits on; the dedicated carrier is implicit."""

    active: tuple[frozenset, frozenset]

    @classmethod
    def default(cls, pool_size: int) -> "AllocationState":
        full = frozenset(range(pool_size))
        return cls((full, full))

    @classmethod
    def vacated(cls, pool_size: int, operator: str, k: int) -> "AllocationState":
        """``operator`` stops using the lowest-indexed ``k`` pool carriers."""
        full = frozenset(range(pool_size))
        cut = full - frozenset(range(k))
        return cls(tuple(cut if op == operator else full for op in OPERATORS))

    def pool(self, op: str) -> frozenset:
        return self.active[OPERATORS.index(op)]

    def is_default(self, pool_size: int) -> bool:
        return self == AllocationState.default(pool_size)

    def carrier_mask(self, op: str, pool_size: int) -> np.ndarray:
        mask = np.zeros(pool_size + 1, dtype=bool)
        mask[list(self.pool(op))] = True
        mask[pool_size] = True
        return mask


@dataclass
class LinkRates:
    """Full time-share rates ``c[user, carrier]`` in bit/s; zero on inactive carriers."""

    c: np.ndarray
    active: np.ndarray


def _user_powers(snapshot: NetworkSnapshot, op: str, params: RadioParams):
    """Per-user serving power, own-network interference and opponent interference."""
    g = snapshot.gains[op]
    p = params.tx_power
    if g.shape[0] == 0:
        empty = np.zeros(0)
        return empty, empty, empty
    own = snapshot.own_columns(op)
    serving = snapshot.serving_columns(op)
    rows = np.arange(g.shape[0])
    signal = p * g[rows, serving]
    own_mask = np.zeros(g.shape, dtype=bool)
    own_mask[:, own] = True
    own_mask[rows, serving] = False
    own_interf = p * np.where(own_mask, g, 0.0).sum(axis=1)
    opp_interf = p * g[:, snapshot.bs_owner != OPERATORS.index(op)].sum(axis=1)
    return signal, own_interf, opp_interf


def sinr(user: int, carrier: int, snapshot: NetworkSnapshot, op: str,
         allocation: AllocationState, params: RadioParams) -> float:
    K = params.pool_size
    if carrier != K and carrier not in allocation.pool(op):
        raise InvalidQueryError(f"operator {op} is not active on carrier {carrier}")
    g = snapshot.gains[op][user]
    p = params.tx_power
    serving = snapshot.serving_columns(op)[user]
    own_idx = OPERATORS.index(op)
    interference = 0.0
    for col, owner in enumerate(snapshot.bs_owner):
        if col == serving:
            continue
        if owner == own_idx:
            interference += p * g[col]
        elif carrier != K and carrier in allocation.pool(OPERATORS[owner]):
            interference += p * g[col]
    return p * g[serving] / (noise_power_per_cc(params) + interference)


def full_rate(gamma, params: RadioParams):
    return params.cc_bandwidth * np.log2(1.0 + np.asarray(gamma) / params.sinr_efficiency)


def link_rates(snapshot: NetworkSnapshot, op: str, allocation: AllocationState,
               params: RadioParams) -> LinkRates:
    K = params.pool_size
    opp = OPERATORS[1 - OPERATORS.index(op)]
    signal, own_i, opp_i = _user_powers(snapshot, op, params)
    i0 = noise_power_per_cc(params)
    c_free = full_rate(signal / (i0 + own_i), params)
    c_shared = full_rate(signal / (i0 + own_i + opp_i), params)
    mask = allocation.carrier_mask(op, K)
    c = np.zeros((len(signal), K + 1))
    for k in range(K):
        if mask[k]:
            c[:, k] = c_shared if k in allocation.pool(opp) else c_free
    c[:, K] = c_free
    return LinkRates(c, mask)


def state_rates(snapshot: NetworkSnapshot, op: str, params: RadioParams):
    """Rate matrices for every allocation a favor can produce, for one operator.

    Returns ``(c, active)`` with leading axis over states ordered as:
    default, opponent vacates ``1..K``, self vacates ``1..K``.
    """
    K = params.pool_size
    signal, own_i, opp_i = _user_powers(snapshot, op, params)
    i0 = noise_power_per_cc(params)
    c_free = full_rate(signal / (i0 + own_i), params)
    c_shared = full_rate(signal / (i0 + own_i + opp_i), params)
    n = len(signal)
    c = np.empty((2 * K + 1, n, K + 1))
    active = np.ones((2 * K + 1, K + 1), dtype=bool)
    c[:, :, :K] = c_shared[None, :, None]
    c[:, :, K] = c_free[None, :]
    for k in range(1, K + 1):
        c[k, :, :k] = c_free[:, None]
        c[K + k, :, :k] = 0.0
        active[K + k, :k] = False
    return c, active
