"""Indoor two-operator geometry, Poisson user drops and association."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPERATORS = ("A", "B")


class InvalidParameterError(ValueError):
    pass


def _default_bs_positions() -> dict[str, tuple[tuple[float, float], ...]]:
    # four sites on a 25 m grid; each site hosts one small cell of each operator, 2.5 m apart
    grid = ((12.5, 12.5), (37.5, 12.5), (12.5, 37.5), (37.5, 37.5))
    return {
        "A": grid,
        "B": tuple((x + 2.5, y) for x, y in grid),
    }


# two cells per operator on opposite diagonals; available through the config file
INTERLEAVED_BS_POSITIONS = {
    "A": ((12.5, 12.5), (37.5, 37.5)),
    "B": ((12.5, 37.5), (37.5, 12.5)),
}


@dataclass
class Layout:
    hall_side: float = 50.0
    bs_positions: dict[str, tuple[tuple[float, float], ...]] = field(
        default_factory=_default_bs_positions
    )
    min_distance: float = 1.0

    def __post_init__(self):
        if self.hall_side <= 0:
            raise InvalidParameterError("hall_side must be positive")
        if self.min_distance <= 0:
            raise InvalidParameterError("min_distance must be positive")
        self.bs_positions = {
            op: tuple((float(x), float(y)) for x, y in self.bs_positions[op]) for op in OPERATORS
        }
        for op in OPERATORS:
            pos = self.bs_positions[op]
            if not pos:
                raise InvalidParameterError(f"operator {op} needs at least one base station")
            for x, y in pos:
                if not (0 <= x <= self.hall_side and 0 <= y <= self.hall_side):
                    raise InvalidParameterError(f"base station {(x, y)} lies outside the hall")

    def all_bs(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked BS coordinates of both operators and the owning-operator index per row."""
        coords = np.array([p for op in OPERATORS for p in self.bs_positions[op]], dtype=float)
        owner = np.array([i for i, op in enumerate(OPERATORS) for _ in self.bs_positions[op]])
        return coords, owner


@dataclass(frozen=True)
class PathlossModel:
    attenuation_constant: float = 1e-4
    exponent: float = 3.7

    def __post_init__(self):
        if self.attenuation_constant <= 0 or self.exponent <= 0:
            raise InvalidParameterError("pathloss constants must be positive")


@dataclass
class UserDrop:
    operator_id: str
    positions: np.ndarray  # (n, 2), meters

    @property
    def realized_count(self) -> int:
        return len(self.positions)


@dataclass
class NetworkSnapshot:
    """One stage's user drop for both operators.

    ``gains[op]`` has one row per user of ``op`` and one column per BS of the
    stacked layout (operator A's BSs first); ``bs_owner`` maps columns to
    operator index.
    """

    drops: dict[str, UserDrop]
    gains: dict[str, np.ndarray]
    association: dict[str, np.ndarray]
    bs_owner: np.ndarray

    def n_users(self, op: str) -> int:
        return self.drops[op].realized_count

    def own_columns(self, op: str) -> np.ndarray:
        return np.flatnonzero(self.bs_owner == OPERATORS.index(op))

    def serving_columns(self, op: str) -> np.ndarray:
        """Gain-matrix column of each user's serving BS."""
        return self.own_columns(op)[self.association[op]]


def generate_users(mean: float, rng: np.random.Generator | int | None, hall_side: float = 50.0,
                   operator_id: str = "A") -> UserDrop:
    if mean < 0:
        raise InvalidParameterError(f"mean user count must be non-negative, got {mean}")
    rng = np.random.default_rng(rng)
    n = rng.poisson(mean)
    positions = rng.uniform(0.0, hall_side, size=(n, 2))
    return UserDrop(operator_id, positions)


def pathloss_gain(distance, model: PathlossModel = PathlossModel(), min_distance: float = 1.0):
    d = np.maximum(np.asarray(distance, dtype=float), min_distance)
    gain = model.attenuation_constant * d ** (-model.exponent)
    return float(gain) if np.ndim(gain) == 0 else gain


def associate(user_position, own_bs_positions, model: PathlossModel = PathlossModel(),
              min_distance: float = 1.0) -> int:
    own = np.asarray(own_bs_positions, dtype=float).reshape(-1, 2)
    if len(own) == 0:
        raise InvalidParameterError("cannot associate without base stations")
    dist = np.hypot(*(own - np.asarray(user_position, dtype=float)).T)
    # argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(pathloss_gain(dist, model, min_distance)))


def gain_matrix(positions: np.ndarray, bs_coords: np.ndarray, model: PathlossModel,
                min_distance: float) -> np.ndarray:
    diff = positions[:, None, :] - bs_coords[None, :, :]
    return pathloss_gain(np.hypot(diff[..., 0], diff[..., 1]), model, min_distance).reshape(
        len(positions), len(bs_coords))


def build_snapshot(drops: dict[str, UserDrop], layout: Layout,
                   model: PathlossModel = PathlossModel()) -> NetworkSnapshot:
    coords, owner = layout.all_bs()
    gains, assoc = {}, {}
    for i, op in enumerate(OPERATORS):
        g = gain_matrix(drops[op].positions, coords, model, layout.min_distance)
        own_cols = np.flatnonzero(owner == i)
        gains[op] = g
        assoc[op] = np.argmax(g[:, own_cols], axis=1) if len(g) else np.zeros(0, dtype=int)
    return NetworkSnapshot(drops, gains, assoc, owner)


def generate_snapshot(means: dict[str, float], layout: Layout, model: PathlossModel,
                      rng: np.random.Generator | int | None) -> NetworkSnapshot:
    rng = np.random.default_rng(rng)
    drops = {op: generate_users(means[op], rng, layout.hall_side, op) for op in OPERATORS}
    return build_snapshot(drops, layout, model)
