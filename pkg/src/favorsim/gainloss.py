"""Favor valuation and empirical gain/loss distributions.

A favor of size ``k`` always covers the lowest-indexed ``k`` pool carriers.
The gain of operator X is the PF-utility increase when the opponent vacates
those carriers; the loss is the decrease when X itself vacates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deployment import OPERATORS, NetworkSnapshot
from .params import SimParams
from .radio import state_rates
from .scheduler import solve_states

DIRECTIONS = ("gain", "loss")
# utilities are sums of logs of ~1e7 bit/s rates; differences below this are solver noise
VALUE_ROUNDOFF = 1e-9


class EmptyStoreError(ValueError):
    pass


@dataclass
class FavorValuation:
    """Everything one operator can evaluate about favors in one snapshot.

    ``utilities``/``rates`` are indexed by state: 0 is the default allocation,
    ``k`` (1..K) the opponent vacating ``k`` carriers, ``K + k`` the operator
    itself vacating ``k`` carriers.
    """

    operator: str
    pool_size: int
    utilities: np.ndarray
    rates: np.ndarray

    def _diff(self, a, b) -> float:
        d = float(a - b)
        return 0.0 if abs(d) < VALUE_ROUNDOFF else d

    def gain(self, k: int) -> float:
        return self._diff(self.utilities[k], self.utilities[0])

    def loss(self, k: int) -> float:
        return self._diff(self.utilities[0], self.utilities[self.pool_size + k])

    @property
    def gains(self) -> np.ndarray:
        return np.array([self.gain(k) for k in range(1, self.pool_size + 1)])

    @property
    def losses(self) -> np.ndarray:
        return np.array([self.loss(k) for k in range(1, self.pool_size + 1)])

    def default_rates(self) -> np.ndarray:
        return self.rates[0]

    def taker_rates(self, k: int) -> np.ndarray:
        return self.rates[k]

    def grantor_rates(self, k: int) -> np.ndarray:
        return self.rates[self.pool_size + k]


def scheduling_groups(snapshot: NetworkSnapshot, op: str, params: SimParams):
    return snapshot.association[op] if params.scheduler.group == "bs" else None


def evaluate_favors(snapshot: NetworkSnapshot, op: str, params: SimParams) -> FavorValuation:
    c, active = state_rates(snapshot, op, params.radio)
    opts = params.scheduler
    utilities, rates = solve_states(c, active, scheduling_groups(snapshot, op, params),
                                    opts.tolerance, opts.max_iters)
    return FavorValuation(op, params.pool_size, utilities, rates)


def value_gain(snapshot: NetworkSnapshot, op: str, k: int, params: SimParams) -> float:
    _check_k(k, params)
    return evaluate_favors(snapshot, op, params).gain(k)


def value_loss(snapshot: NetworkSnapshot, op: str, k: int, params: SimParams) -> float:
    _check_k(k, params)
    return evaluate_favors(snapshot, op, params).loss(k)


def _check_k(k: int, params: SimParams):
    if not 1 <= k <= params.pool_size:
        raise ValueError(f"favor size must be in 1..{params.pool_size}, got {k}")


@dataclass
class SampleStore:
    """Empirical multiset of gain or loss samples for one (operator, direction, k).

    Queries use the empirical distribution: ``cdf_at`` counts samples ``<= x``.
    """

    operator: str
    direction: str
    k: int
    samples: list = field(default_factory=list)

    def __post_init__(self):
        self._sorted = None

    def add(self, value: float):
        self.samples.append(float(value))
        self._sorted = None

    def extend(self, values):
        self.samples.extend(float(v) for v in values)
        self._sorted = None

    def merge(self, other: "SampleStore") -> "SampleStore":
        if (other.operator, other.direction, other.k) != (self.operator, self.direction, self.k):
            raise ValueError("cannot merge stores of different keys")
        self.extend(other.samples)
        return self

    def __len__(self):
        return len(self.samples)

    @property
    def key(self):
        return (self.operator, self.direction, self.k)

    def _table(self):
        if not self.samples:
            raise EmptyStoreError(f"store {self.key} is empty")
        if self._sorted is None:
            s = np.sort(np.asarray(self.samples, dtype=float))
            self._sorted = (s, np.concatenate(([0.0], np.cumsum(s))))
        return self._sorted

    def sorted_samples(self) -> np.ndarray:
        return self._table()[0]

    def mean(self) -> float:
        s, cs = self._table()
        return cs[-1] / len(s)

    def cdf_at(self, x):
        s, _ = self._table()
        return np.searchsorted(s, x, side="right") / len(s)

    def partial_mean_below(self, x):
        """``(1/N) * sum of samples <= x``."""
        s, cs = self._table()
        return cs[np.searchsorted(s, x, side="right")] / len(s)

    def partial_mean_above(self, x):
        """``(1/N) * sum of samples > x``."""
        s, cs = self._table()
        return (cs[-1] - cs[np.searchsorted(s, x, side="right")]) / len(s)

    def quantile(self, q):
        return np.quantile(self.sorted_samples(), q)

    def interpolated(self) -> "InterpolatedStore":
        return InterpolatedStore(self.sorted_samples())


class InterpolatedStore:
    """Continuous counterpart of a :class:`SampleStore`.

    Each sorted sample spreads its ``1/N`` mass uniformly over the gap back to
    the previous sample (the first one back to zero), so the CDF is piecewise
    linear through ``(s_i, i/N)``.  Ties become point masses.  Thresholds
    computed from it vary continuously, which lets root finding hit the
    reciprocity constraint exactly.
    """

    def __init__(self, sorted_samples: np.ndarray):
        s = np.asarray(sorted_samples, dtype=float)
        if s.size == 0:
            raise EmptyStoreError("cannot interpolate an empty store")
        if s[0] < 0:
            raise ValueError("interpolated stores need non-negative samples")
        self.s = s
        self.n = len(s)
        self.lower = np.concatenate(([0.0], s))
        mids = 0.5 * (self.lower[:-1] + s)
        self.cm = np.concatenate(([0.0], np.cumsum(mids)))

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.s, x, side="right")
        lo = self.lower[i]
        hi = self.s[np.minimum(i, self.n - 1)]
        inside = (i < self.n) & np.isfinite(x) & (x > lo)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            frac = np.where(inside, (x - lo) / np.where(inside, hi - lo, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        return x, i, lo, frac

    def mean(self) -> float:
        return self.cm[-1] / self.n

    def cdf_at(self, x):
        _, i, _, frac = self._locate(x)
        return (i + frac) / self.n

    def partial_mean_below(self, x):
        x, i, lo, frac = self._locate(x)
        part = np.where(frac > 0, frac * 0.5 * (lo + np.where(frac > 0, x, 0.0)), 0.0)
        return (self.cm[i] + part) / self.n

    def partial_mean_above(self, x):
        return self.mean() - self.partial_mean_below(x)


class StoreSet(dict):
    """Stores keyed by ``(operator, direction, k)``."""

    @classmethod
    def empty(cls, pool_size: int) -> "StoreSet":
        out = cls()
        for op in OPERATORS:
            for d in DIRECTIONS:
                for k in range(1, pool_size + 1):
                    out[(op, d, k)] = SampleStore(op, d, k)
        return out

    @property
    def pool_size(self) -> int:
        return max(k for _, _, k in self)

    def record(self, valuation: FavorValuation):
        op = valuation.operator
        for k in range(1, valuation.pool_size + 1):
            self[(op, "gain", k)].add(valuation.gain(k))
            self[(op, "loss", k)].add(valuation.loss(k))

    def merge(self, other: "StoreSet") -> "StoreSet":
        for key, store in other.items():
            self[key].merge(store)
        return self

    def gains(self, op: str) -> list:
        return [self[(op, "gain", k)] for k in range(1, self.pool_size + 1)]

    def losses(self, op: str) -> list:
        return [self[(op, "loss", k)] for k in range(1, self.pool_size + 1)]


def store_filename(op: str, direction: str, k: int) -> str:
    return f"{op}_{direction}_k{k}.txt"


def write_store(store: SampleStore, path: Path):
    with open(path, "w") as fh:
        fh.write(f"# operator={store.operator},direction={store.direction},k={store.k}\n")
        for v in store.samples:
            fh.write(f"{v!r}\n")


def read_store(path: Path) -> SampleStore:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing store header")
        meta = dict(item.split("=", 1) for item in header[1:].strip().split(","))
        store = SampleStore(meta["operator"], meta["direction"], int(meta["k"]))
        store.extend(float(line) for line in fh if line.strip())
    return store


def write_stores(stores: StoreSet, directory: Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (op, d, k), store in sorted(stores.items()):
        write_store(store, directory / store_filename(op, d, k))


def read_stores(directory: Path) -> StoreSet:
    out = StoreSet()
    for path in sorted(Path(directory).glob("*_k*.txt")):
        store = read_store(path)
        out[store.key] = store
    if not out:
        raise FileNotFoundError(f"no store files in {directory}")
    return out
