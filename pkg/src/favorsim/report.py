"""CSV/JSON outputs, summary statistics and rate-CDF plots.

File schemas (all CSVs have a header row):

``rates_favor.csv``, ``rates_baseline.csv``
    stage, operator, user, rate  (rate in bit/s)
``ledger.csv``
    stage, n_A, n_B, action_A, action_B, outcome, grantor, k,
    taken_A, given_A, taken_B, given_B  (cumulative carrier-stages)
``thresholds.csv``
    stage, operator, k, theta, lambda  (one row per update epoch and size)
``solver_reports.jsonl``
    one JSON object per (epoch, operator)
``summary.csv``
    scheme, operator, mean, p10, p50, p90  with scheme in favor, baseline,
    improvement (favor / baseline - 1)
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deployment import OPERATORS
from .game import RateLog

RATE_FIELDS = ("stage", "operator", "user", "rate")
LEDGER_FIELDS = ("stage", "n_A", "n_B", "action_A", "action_B", "outcome", "grantor", "k",
                 "taken_A", "given_A", "taken_B", "given_B")
THRESHOLD_FIELDS = ("stage", "operator", "k", "theta", "lambda")
STATS = ("mean", "p10", "p50", "p90")


class EmptyLogError(ValueError):
    pass


def write_rates(log: RateLog, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATE_FIELDS)
        for s, op, u, r in zip(log.stage.tolist(), log.operator.tolist(), log.user.tolist(),
                               log.rate.tolist()):
            w.writerow((s, op, u, repr(r)))


def read_rates(path: Path) -> RateLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RATE_FIELDS:
            raise ValueError(f"{path}: expected columns {RATE_FIELDS}, got {header}")
        rows = list(reader)
    if not rows:
        return RateLog.from_chunks([])
    stage, op, user, rate = zip(*rows)
    return RateLog(np.array(stage, dtype=int), np.array(op), np.array(user, dtype=int),
                   np.array(rate, dtype=float))


def write_ledger(stage_log: list, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LEDGER_FIELDS)
        w.writeheader()
        w.writerows(stage_log)


def read_ledger(path: Path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ints = ("stage", "n_A", "n_B", "k", "taken_A", "given_A", "taken_B", "given_B")
    for row in rows:
        for key in ints:
            row[key] = int(row[key])
    return rows


def write_trajectory(trajectory: list, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(THRESHOLD_FIELDS)
        for stage, op, thr in trajectory:
            for k, (t, l) in enumerate(zip(thr.theta.tolist(), thr.lam.tolist()), start=1):
                w.writerow((stage, op, k, repr(t), repr(l)))


def read_trajectory(path: Path) -> list:
    with open(path, newline="") as fh:
        return [{"stage": int(r["stage"]), "operator": r["operator"], "k": int(r["k"]),
                 "theta": float(r["theta"]), "lambda": float(r["lambda"])}
                for r in csv.DictReader(fh)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_reports(reports: list, path: Path):
    with open(path, "w") as fh:
        for entry in reports:
            fh.write(json.dumps(_jsonable(entry), sort_keys=True) + "\n")


def read_reports(path: Path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def rate_stats(rates: np.ndarray) -> dict:
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise EmptyLogError("no user rates to summarize (empty rate log)")
    p10, p50, p90 = np.percentile(rates, [10, 50, 90])
    return {"mean": float(rates.mean()), "p10": float(p10), "p50": float(p50), "p90": float(p90)}


@dataclass
class ReportSummary:
    favor: dict  # operator -> stats
    baseline: dict
    improvement: dict
    ledger: dict = field(default_factory=dict)  # taken_X / given_X totals

    def as_dict(self) -> dict:
        return {"favor": self.favor, "baseline": self.baseline, "improvement": self.improvement,
                "ledger": self.ledger}

    def rows(self):
        for scheme in ("favor", "baseline", "improvement"):
            for op, stats in getattr(self, scheme).items():
                yield {"scheme": scheme, "operator": op, **stats}


def summarize(favor: RateLog, baseline: RateLog, stage_log: list | None = None) -> ReportSummary:
    fav, base, imp = {}, {}, {}
    for op in OPERATORS:
        fav[op] = rate_stats(favor.rates(op))
        base[op] = rate_stats(baseline.rates(op))
        imp[op] = {s: fav[op][s] / base[op][s] - 1.0 for s in STATS}
    ledger = {}
    if stage_log:
        last = stage_log[-1]
        ledger = {key: int(last[key]) for key in ("taken_A", "given_A", "taken_B", "given_B")}
        ledger["stages"] = len(stage_log)
        ledger["exchanges"] = sum(1 for r in stage_log if r["outcome"] == "exchange")
    return ReportSummary(fav, base, imp, ledger)


def write_summary(summary: ReportSummary, out_dir: Path):
    out_dir = Path(out_dir)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=("scheme", "operator", *STATS))
        w.writeheader()
        for row in summary.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    (out_dir / "summary.json").write_text(json.dumps(summary.as_dict(), indent=2, sort_keys=True)
                                          + "\n")


def format_summary(summary: ReportSummary) -> str:
    lines = [f"{'operator':<9}{'stat':<6}{'favor':>14}{'baseline':>14}{'change':>9}"]
    for op in summary.favor:
        for s in STATS:
            lines.append(f"{op:<9}{s:<6}{summary.favor[op][s] / 1e6:>11.2f} Mb"
                         f"{summary.baseline[op][s] / 1e6:>11.2f} Mb"
                         f"{100 * summary.improvement[op][s]:>8.1f}%")
    if summary.ledger:
        lg = summary.ledger
        lines.append(f"exchanges {lg['exchanges']} / {lg['stages']} stages; carrier-stages taken "
                     f"A={lg['taken_A']} B={lg['taken_B']}")
    return "\n".join(lines)


def plot_rate_cdfs(favor: RateLog, baseline: RateLog, out_dir: Path) -> list:
    """One SVG per operator with the favor-scheme and baseline user-rate CDFs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "favorsim", "svg.fonttype": "none"}):
        for op in OPERATORS:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for log, label, style in ((favor, "favor exchange", "-"),
                                      (baseline, "static allocation", "--")):
                r = np.sort(log.rates(op)) / 1e6
                if r.size:
                    ax.plot(r, np.arange(1, r.size + 1) / r.size, style, label=label)
            ax.set_xlabel("user rate [Mbit/s]")
            ax.set_ylabel("CDF")
            ax.set_title(f"Operator {op}")
            ax.grid(alpha=0.3)
            ax.legend(loc="lower right")
            fig.tight_layout()
            path = Path(out_dir) / f"rate_cdf_{op}.svg"
            fig.savefig(path, metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths
