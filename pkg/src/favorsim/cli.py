"""Command-line entry point: ``favorsim {init,run,baseline,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report
from .config import ExperimentConfig, load, save
from .gainloss import StoreSet, read_stores, write_stores
from .game import RateLog, run_baseline, run_game, run_initialization

log = logging.getLogger("favorsim")

STORE_DIR = "stores"


def _init_chunk(args):
    n, params, seed, loads, start = args
    return run_initialization(n, params, seed, loads, start)


def cmd_init(config: ExperimentConfig, workers: int = 1) -> StoreSet:
    """Initialization phase; writes one store file per (operator, direction, size)."""
    n, run = config.run.n_snapshots, config.run
    if workers > 1 and n > workers:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        jobs = [(int(b - a), config.sim, run.seed, run.init_loads, int(a))
                for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_init_chunk, jobs))
        stores = parts[0]
        for part in parts[1:]:
            stores.merge(part)
    else:
        stores = run_initialization(n, config.sim, run.seed, run.init_loads)
    out = Path(run.out)
    write_stores(stores, out / STORE_DIR)
    save(config, out / "config.ini")
    return stores


def format_stores(stores: StoreSet) -> str:
    lines = [f"{'store':<16}{'count':>8}{'mean':>9}{'p10':>9}{'p50':>9}{'p90':>9}"]
    for key in sorted(stores):
        s = stores[key]
        name = f"{key[0]} {key[1]} k={key[2]}"
        if len(s) == 0:
            lines.append(f"{name:<16}{0:>8}")
            continue
        q = s.quantile([0.1, 0.5, 0.9])
        lines.append(f"{name:<16}{len(s):>8}{s.mean():>9.3f}{q[0]:>9.3f}{q[1]:>9.3f}{q[2]:>9.3f}")
    return "\n".join(lines)


def cmd_baseline(config: ExperimentConfig) -> RateLog:
    out = Path(config.run.out)
    out.mkdir(parents=True, exist_ok=True)
    base = run_baseline(config.schedule(), config.sim, config.run.seed)
    report.write_rates(base, out / "rates_baseline.csv")
    return base


def cmd_run(config: ExperimentConfig, stores: StoreSet | None = None, plots: bool = True):
    """Favor game and baseline on shared seeds.

    Writes every CSV first, then the summary, so a run whose summary cannot
    be formed (no users at all) still leaves its logs behind.
    """
    out = Path(config.run.out)
    out.mkdir(parents=True, exist_ok=True)
    if stores is None:
        stores = read_stores(out / STORE_DIR)
    if stores.pool_size != config.pool_size:
        raise ValueError(f"stores were built for K={stores.pool_size}, config has "
                         f"K={config.pool_size}")
    schedule = config.schedule()
    result = run_game(schedule, stores, config.sim, config.game, config.run.seed)
    base = run_baseline(schedule, config.sim, config.run.seed)
    report.write_rates(result.rates, out / "rates_favor.csv")
    report.write_rates(base, out / "rates_baseline.csv")
    report.write_ledger(result.stage_log, out / "ledger.csv")
    report.write_trajectory(result.trajectory, out / "thresholds.csv")
    report.write_reports(result.reports, out / "solver_reports.jsonl")
    save(config, out / "config.ini")
    summary = report.summarize(result.rates, base, result.stage_log)
    report.write_summary(summary, out)
    if plots:
        report.plot_rate_cdfs(result.rates, base, out)
    return result, base, summary


def cmd_report(out_dir: str | Path, plots: bool = False) -> report.ReportSummary:
    """Summary recomputed from the CSVs of an earlier ``run``."""
    out = Path(out_dir)
    favor = report.read_rates(out / "rates_favor.csv")
    base = report.read_rates(out / "rates_baseline.csv")
    ledger_path = out / "ledger.csv"
    stage_log = report.read_ledger(ledger_path) if ledger_path.exists() else None
    summary = report.summarize(favor, base, stage_log)
    report.write_summary(summary, out)
    if plots:
        report.plot_rate_cdfs(favor, base, out)
    return summary


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment INI file (defaults for missing keys)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--stages", type=int, help="number of stage games")
    common.add_argument("--snapshots", type=int, help="initialization snapshots")
    common.add_argument("--pool-size", type=int, help="carriers in the shared pool (K)")
    common.add_argument("--scenario", choices=("asymmetric", "equal", "custom"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="favorsim",
                                     description="Spectrum-usage favor exchange between two "
                                                 "small-cell operators.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("init", parents=[common], help="build gain/loss stores")
    p.add_argument("--workers", type=int, default=1, help="processes for the snapshot loop")
    p = sub.add_parser("run", parents=[common], help="play the favor game and the baseline")
    p.add_argument("--no-plots", action="store_true", help="skip the SVG rate CDFs")
    sub.add_parser("baseline", parents=[common], help="static allocation only")
    p = sub.add_parser("report", parents=[common], help="summarize CSVs of an earlier run")
    p.add_argument("--plots", action="store_true", help="also redraw the SVG rate CDFs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load(args.config).with_overrides(
            seed=args.seed, out=args.out, stages=args.stages, snapshots=args.snapshots,
            pool_size=args.pool_size, scenario=args.scenario)
        if args.command == "init":
            stores = cmd_init(config, args.workers)
            print(format_stores(stores))
        elif args.command == "run":
            *_, summary = cmd_run(config, plots=not args.no_plots)
            print(report.format_summary(summary))
        elif args.command == "baseline":
            base = cmd_baseline(config)
            for op in ("A", "B"):
                st = report.rate_stats(base.rates(op))
                print(f"{op}: mean {st['mean'] / 1e6:.2f} Mb/s, p10 {st['p10'] / 1e6:.2f} Mb/s")
        else:
            print(report.format_summary(cmd_report(config.run.out, args.plots)))
    except (ValueError, FileNotFoundError) as exc:
        print(f"favorsim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
