"""Experiment configuration as a flat INI file.

Every key has a default, so an empty file describes the full-scale setup
(200 000 initialization snapshots, 10 000 stages).  Sections::

    [layout]     hall_side, min_distance, bs_A, bs_B  ("x y; x y; ...")
    [pathloss]   attenuation_constant, exponent
    [radio]      tx_power_dbm, noise_density_dbm_hz, noise_figure_db,
                 cc_bandwidth, sinr_efficiency, pool_size
    [scheduler]  group (bs | operator), tolerance, max_iters
    [game]       update_period, theta_step, lam_step, min_obs,
                 resolution, lam_quantile, residual_tol, estimator
    [scenario]   kind (asymmetric | equal | custom), high, low, swap_at,
                 mean, loads_file
    [run]        n_snapshots, n_stages, seed, init_loads, out
"""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .deployment import OPERATORS, Layout, PathlossModel
from .game import DEFAULT_INIT_LOADS, GameConfig, ScenarioSchedule
from .params import SchedulerOptions, SimParams
from .radio import RadioParams
from .thresholds import SolverConfig

SCENARIOS = ("asymmetric", "equal", "custom")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "asymmetric"
    high: float = 8.0
    low: float = 2.0
    swap_at: int | None = None  # None: half of the stages
    mean: float = 5.0
    loads_file: str = ""  # custom: CSV with columns mean_A,mean_B, one row per stage

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"scenario kind must be one of {SCENARIOS}, got {self.kind!r}")
        if self.kind == "custom" and not self.loads_file:
            raise ValueError("custom scenario needs loads_file")

    def schedule(self, n_stages: int, base_dir: Path | None = None) -> ScenarioSchedule:
        if self.kind == "asymmetric":
            return ScenarioSchedule.asymmetric(n_stages, self.high, self.low, self.swap_at)
        if self.kind == "equal":
            return ScenarioSchedule.equal(n_stages, self.mean)
        path = Path(self.loads_file)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        with open(path, newline="") as fh:
            rows = [(float(r["mean_A"]), float(r["mean_B"])) for r in csv.DictReader(fh)]
        return ScenarioSchedule(np.array(rows[:n_stages]).reshape(-1, 2))


@dataclass(frozen=True)
class RunConfig:
    n_snapshots: int = 200_000
    n_stages: int = 10_000
    seed: int = 0
    init_loads: tuple = DEFAULT_INIT_LOADS
    out: str = "results"


@dataclass
class ExperimentConfig:
    sim: SimParams = field(default_factory=SimParams)
    game: GameConfig = field(default_factory=GameConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def pool_size(self) -> int:
        return self.sim.pool_size

    def schedule(self, base_dir: Path | None = None) -> ScenarioSchedule:
        return self.scenario.schedule(self.run.n_stages, base_dir)

    def with_overrides(self, seed=None, out=None, stages=None, snapshots=None,
                       pool_size=None, scenario=None) -> "ExperimentConfig":
        """Copy with the command-line overrides applied (``None`` keeps the value)."""
        run = self.run
        if seed is not None:
            run = replace(run, seed=seed)
        if out is not None:
            run = replace(run, out=str(out))
        if stages is not None:
            run = replace(run, n_stages=stages)
        if snapshots is not None:
            run = replace(run, n_snapshots=snapshots)
        sim = self.sim
        if pool_size is not None:
            sim = replace(sim, radio=replace(sim.radio, pool_size=pool_size))
        sc = self.scenario if scenario is None else replace(self.scenario, kind=scenario)
        return ExperimentConfig(sim, self.game, sc, run)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _fmt_positions(pos) -> str:
    return "; ".join(f"{x!r} {y!r}" for x, y in pos)


def _parse_positions(text: str):
    out = []
    for item in text.split(";"):
        if item.strip():
            x, y = item.split()
            out.append((float(x), float(y)))
    return tuple(out)


def _coerce(text: str, default):
    """Parse ``text`` to the type of the dataclass default it replaces."""
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(v) if v.lstrip("-").isdigit() else float(v) for v in text.split())
    return text.strip()


def _section_values(obj, skip=()) -> dict:
    return {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj) if f.name not in skip}


def _read_section(parser, name, cls, overrides=None, skip=()):
    defaults = cls()
    kwargs = {}
    if parser.has_section(name):
        for key, text in parser.items(name):
            if key in skip:
                continue
            if key not in {f.name for f in fields(cls)}:
                raise ValueError(f"unknown key [{name}] {key}")
            default = getattr(defaults, key)
            if default is None:
                kwargs[key] = int(text) if text.strip() else None
            else:
                kwargs[key] = _coerce(text, default)
    kwargs.update(overrides or {})
    return cls(**kwargs)


def to_parser(config: ExperimentConfig) -> configparser.ConfigParser:
    p = configparser.ConfigParser()
    lay = config.sim.layout
    p["layout"] = {"hall_side": _fmt(lay.hall_side), "min_distance": _fmt(lay.min_distance),
                   **{f"bs_{op}": _fmt_positions(lay.bs_positions[op]) for op in OPERATORS}}
    p["pathloss"] = _section_values(config.sim.pathloss)
    p["radio"] = _section_values(config.sim.radio)
    p["scheduler"] = _section_values(config.sim.scheduler)
    p["game"] = {**_section_values(config.game, skip=("solver",)),
                 **_section_values(config.game.solver)}
    p["scenario"] = _section_values(config.scenario)
    p["run"] = _section_values(config.run)
    return p


def serialize(config: ExperimentConfig) -> str:
    buf = io.StringIO()
    to_parser(config).write(buf)
    return buf.getvalue()


def parse(text: str) -> ExperimentConfig:
    p = configparser.ConfigParser()
    p.read_string(text)
    known = {"layout", "pathloss", "radio", "scheduler", "game", "scenario", "run"}
    unknown = set(p.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")

    lay_kwargs = {}
    if p.has_section("layout"):
        sec = p["layout"]
        for key in ("hall_side", "min_distance"):
            if key in sec:
                lay_kwargs[key] = float(sec[key])
        bs = dict(Layout().bs_positions)
        for op in OPERATORS:
            if f"bs_{op.lower()}" in sec:
                bs[op] = _parse_positions(sec[f"bs_{op.lower()}"])
        lay_kwargs["bs_positions"] = bs
        extra = set(sec) - {"hall_side", "min_distance", *(f"bs_{op.lower()}" for op in OPERATORS)}
        if extra:
            raise ValueError(f"unknown keys in [layout]: {sorted(extra)}")
    sim = SimParams(
        layout=Layout(**lay_kwargs),
        pathloss=_read_section(p, "pathloss", PathlossModel),
        radio=_read_section(p, "radio", RadioParams),
        scheduler=_read_section(p, "scheduler", SchedulerOptions),
    )
    solver_keys = {f.name for f in fields(SolverConfig)}
    solver_over = {}
    if p.has_section("game"):
        sec = p["game"]
        defaults = SolverConfig()
        solver_over = {k: _coerce(sec[k], getattr(defaults, k)) for k in solver_keys if k in sec}
    game = _read_section(p, "game", GameConfig, skip=solver_keys)
    game = replace(game, solver=SolverConfig(**solver_over))
    return ExperimentConfig(sim, game, _read_section(p, "scenario", ScenarioConfig),
                            _read_section(p, "run", RunConfig))


def load(path: str | Path | None) -> ExperimentConfig:
    """Config from ``path``; ``None`` gives all defaults."""
    if path is None:
        return ExperimentConfig()
    return parse(Path(path).read_text())


def save(config: ExperimentConfig, path: str | Path):
    Path(path).write_text(serialize(config))
