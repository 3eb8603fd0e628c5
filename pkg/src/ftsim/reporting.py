"""Turn traces into per-strategy summary rows, render them, and compare strategies."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Sequence

from .costs import StrategyKind
from .engine import Scenario, Trace, run_trials
from .failures import FaultMode
from .scenario import SuiteSpec

GAP = "gap"  # a cell that was expected but has no completed run
TOTAL_COLUMNS = ("total_no_failure_s", "total_one_periodic_s", "total_one_random_s", "total_five_random_s")
COLUMNS = (
    "predict_s",
    "reinstate_periodic_s",
    "reinstate_random_s",
    "overhead_periodic_s",
    "overhead_random_s",
) + TOTAL_COLUMNS
FLAG_TRUNCATED = "truncated-final-interval"
FLAG_RESTART = "restart-composition-differs"
FLAG_FAILED = "job-failed"


def format_hms(seconds: float | None | str) -> str:
    """hh:mm:ss with the seconds floored; hours may exceed 24. Values under one
    second keep two decimals (00:00:0.47). None renders as '-'."""
    if seconds is None:
        return "-"
    if seconds == GAP:
        return GAP
    if seconds < 0:
        return "-" + format_hms(-seconds)
    if 0 < seconds < 1:
        return f"00:00:{seconds:.2f}"
    s = int(seconds)
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


def parse_hms(text: str) -> float | None:
    text = text.strip()
    if text == "-":
        return None
    sign = -1 if text.startswith("-") else 1
    h, m, s = text.lstrip("-").split(":")
    return sign * (int(h) * 3600 + int(m) * 60 + float(s))


def _r(values: Sequence[str]) -> tuple[float | None, ...]:
    return tuple(parse_hms(v) for v in values)


# Published measurements, in COLUMNS order; '-' where a column does not apply.
_C1 = "ckpt-central-single", "ckpt-central-multi", "ckpt-decentral"
REFERENCE: dict[str, dict[tuple[str, int], tuple[float | None, ...]]] = {
    "one-hour": {
        (_C1[0], 3600): _r(["-", "00:14:08", "00:14:08", "00:08:05", "00:08:05", "01:00:00", "01:37:13", "01:53:27", "05:27:15"]),
        (_C1[1], 3600): _r(["-", "00:14:08", "00:14:08", "00:09:14", "00:09:14", "01:00:00", "01:38:22", "01:54:36", "05:33:00"]),
        (_C1[2], 3600): _r(["-", "00:15:27", "00:15:27", "00:06:44", "00:06:44", "01:00:00", "01:37:11", "01:53:25", "05:27:05"]),
        ("agent", 3600): _r(["00:00:38", "00:00:0.47", "00:00:0.47", "00:05:14", "00:05:14", "01:00:00", "01:06:17", "01:06:17", "01:32:27"]),
        ("core", 3600): _r(["00:00:38", "00:00:0.38", "00:00:0.38", "00:04:27", "00:04:27", "01:00:00", "01:05:08", "01:05:08", "01:25:42"]),
        ("hybrid", 3600): _r(["00:00:38", "00:00:0.38", "00:00:0.38", "00:04:27", "00:04:27", "01:00:00", "01:05:08", "01:05:08", "01:25:42"]),
    },
    "five-hour": {
        ("cold-restart", 3600): _r(["-", "00:10:00", "00:10:00", "-", "-", "05:00:00", "21:15:17", "23:01:00", "80:31:04"]),
        (_C1[0], 3600): _r(["-", "00:14:08", "00:14:08", "00:08:05", "00:08:05", "05:00:00", "08:01:05", "09:27:15", "27:16:15"]),
        (_C1[0], 7200): _r(["-", "00:15:40", "00:15:40", "00:10:17", "00:10:17", "05:00:00", "07:41:51", "07:58:38", "19:53:10"]),
        (_C1[0], 14400): _r(["-", "00:16:27", "00:16:27", "00:11:53", "00:11:53", "05:00:00", "06:24:20", "07:37:07", "18:05:35"]),
        (_C1[1], 3600): _r(["-", "00:14:08", "00:14:08", "00:09:14", "00:09:14", "05:00:00", "08:07:14", "09:33:23", "27:45:00"]),
        (_C1[1], 7200): _r(["-", "00:15:40", "00:15:40", "00:12:22", "00:12:22", "05:00:00", "07:47:52", "08:07:18", "20:01:16"]),
        (_C1[1], 14400): _r(["-", "00:16:27", "00:16:27", "00:13:57", "00:13:57", "05:00:00", "07:04:28", "07:52:27", "18:45:22"]),
        (_C1[2], 3600): _r(["-", "00:15:27", "00:15:27", "00:06:44", "00:06:44", "05:00:00", "08:00:55", "09:27:05", "27:15:25"]),
        (_C1[2], 7200): _r(["-", "00:17:23", "00:17:23", "00:09:46", "00:09:46", "05:00:00", "07:40:18", "07:57:36", "19:48:00"]),
        (_C1[2], 14400): _r(["-", "00:18:33", "00:18:33", "00:13:03", "00:13:03", "05:00:00", "06:27:36", "07:40:23", "18:21:55"]),
        ("agent", 3600): _r(["00:00:38", "00:00:0.47", "00:00:0.47", "00:05:14", "00:05:14", "05:00:00", "05:31:14", "05:31:14", "07:37:44"]),
        ("agent", 7200): _r(["00:00:38", "00:00:0.47", "00:00:0.47", "00:06:38", "00:06:38", "05:00:00", "05:20:34", "05:20:34", "06:42:41"]),
        ("agent", 14400): _r(["00:00:38", "00:00:0.47", "00:00:0.47", "00:07:41", "00:07:41", "05:00:00", "05:16:27", "05:16:27", "05:39:16"]),
        ("core", 3600): _r(["00:00:38", "00:00:0.38", "00:00:0.38", "00:04:27", "00:04:27", "05:00:00", "05:26:13", "05:26:13", "07:11:37"]),
        ("core", 7200): _r(["00:00:38", "00:00:0.38", "00:00:0.38", "00:05:37", "00:05:37", "05:00:00", "05:16:22", "05:16:22", "06:22:34"]),
        ("core", 14400): _r(["00:00:38", "00:00:0.38", "00:00:0.38", "00:06:29", "00:06:29", "05:00:00", "05:13:32", "05:13:32", "05:31:21"]),
    },
}


def reference_row(reference: str | None, strategy: StrategyKind | str, periodicity_s: int) -> dict[str, float | None] | None:
    row = REFERENCE.get(reference or "", {}).get((StrategyKind(strategy).value, periodicity_s))
    return dict(zip(COLUMNS, row)) if row else None


Cell = float | None | str


@dataclass
class MetricsSummary:
    strategy: StrategyKind
    periodicity_s: int
    predict_s: Cell = None
    reinstate_periodic_s: Cell = None
    reinstate_random_s: Cell = None
    overhead_periodic_s: Cell = None
    overhead_random_s: Cell = None
    total_no_failure_s: Cell = GAP
    total_one_periodic_s: Cell = GAP
    total_one_random_s: Cell = GAP
    total_five_random_s: Cell = GAP
    deviation_s: dict[str, float | None] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.strategy = StrategyKind(self.strategy)

    def sort_key(self) -> tuple[int, int]:
        return list(StrategyKind).index(self.strategy), self.periodicity_s

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsSummary":
        return cls(**d)


def _mean(values: Iterable[float]) -> float | None:
    values = list(values)
    return statistics.fmean(values) if values else None


def _total(traces: Sequence[Trace] | None) -> Cell:
    if not traces:
        return GAP
    done = [t.total_s for t in traces if t.status == "completed"]
    return statistics.fmean(done) if done and len(done) == len(traces) else GAP


def summarize(
    strategy: StrategyKind | str,
    periodicity_s: int,
    cells: dict[str, Sequence[Trace]],
    reference: str | None = None,
    flags: Iterable[str] = (),
) -> MetricsSummary:
    """Fold the traces of one row's cells into a summary.

    ``cells`` maps 'none', 'periodic', 'random' and 'burst' to trace lists; an
    absent or failed cell is a gap, never a zero.
    """
    strategy = StrategyKind(strategy)

    def per_fault(key: str, attr: str) -> Cell:
        traces = cells.get(key)
        if not traces:
            return GAP
        value = _mean(getattr(f, attr) for t in traces for f in t.faults)
        return GAP if value is None else value

    s = MetricsSummary(
        strategy=strategy,
        periodicity_s=periodicity_s,
        predict_s=per_fault("periodic", "predict_s") if strategy.proactive else None,
        reinstate_periodic_s=per_fault("periodic", "reinstate_s"),
        reinstate_random_s=per_fault("random", "reinstate_s"),
        overhead_periodic_s=None if strategy is StrategyKind.COLD_RESTART else per_fault("periodic", "overhead_s"),
        overhead_random_s=None if strategy is StrategyKind.COLD_RESTART else per_fault("random", "overhead_s"),
        total_no_failure_s=_total(cells.get("none")),
        total_one_periodic_s=_total(cells.get("periodic")),
        total_one_random_s=_total(cells.get("random")),
        total_five_random_s=_total(cells.get("burst")),
        flags=list(flags),
    )
    if any(t.status == "failed" for traces in cells.values() for t in traces):
        s.flags.append(FLAG_FAILED)
    ref = reference_row(reference, strategy, periodicity_s)
    if ref:
        for col in TOTAL_COLUMNS:
            model, published = getattr(s, col), ref[col]
            ok = isinstance(model, (int, float)) and published is not None
            s.deviation_s[col] = round(model - published, 3) if ok else None
    return s


def cell_scenarios(template: Scenario, suite: SuiteSpec, strategy: StrategyKind,
                   periodicity_s: int) -> dict[str, Scenario]:
    base_faults = template.faults
    random_mode = FaultMode(suite.random_mode)

    def with_faults(**kw) -> Scenario:
        return replace(template, strategy=strategy, periodicity_s=periodicity_s,
                       faults=replace(base_faults, **kw))

    mean = suite.mean_offset_s.get(periodicity_s, base_faults.mean_offset_s)
    return {
        "none": with_faults(failures_per_interval=0),
        "periodic": with_faults(mode=FaultMode.PERIODIC, failures_per_interval=1,
                                offset_s=suite.periodic_offset_s.get(periodicity_s, base_faults.offset_s)),
        "random": with_faults(mode=random_mode, failures_per_interval=1, mean_offset_s=mean),
        "burst": with_faults(mode=random_mode, failures_per_interval=suite.burst_failures, mean_offset_s=mean),
    }


def run_suite(template: Scenario, suite: SuiteSpec, jobs: int = 1) -> list[MetricsSummary]:
    rows = []
    for strategy in suite.strategies:
        periods = sorted(suite.periodicities_s)
        # restart ignores periodicity; the shortest one only places the faults
        for period in periods[:1] if strategy is StrategyKind.COLD_RESTART else periods:
            cells = {k: run_trials(sc, jobs)[0] for k, sc in cell_scenarios(template, suite, strategy, period).items()}
            flags = []
            if template.base_duration_s % period and template.faults.truncated_interval_faults:
                flags.append(FLAG_TRUNCATED)
            if strategy is StrategyKind.COLD_RESTART and reference_row(suite.reference, strategy, period):
                flags.append(FLAG_RESTART)
            rows.append(summarize(strategy, period, cells, suite.reference, flags))
    rows.sort(key=MetricsSummary.sort_key)
    return rows


def reproduce_table1(jobs: int = 1) -> list[MetricsSummary]:
    from .scenario import preset

    scenario, suite = preset("table1")
    return run_suite(scenario, suite, jobs)


def reproduce_table2(jobs: int = 1) -> list[MetricsSummary]:
    from .scenario import preset

    scenario, suite = preset("table2")
    return run_suite(scenario, suite, jobs)


def _flat(s: MetricsSummary, human: bool) -> dict[str, Any]:
    row: dict[str, Any] = {"strategy": s.strategy.value, "periodicity_s": s.periodicity_s}
    for col in COLUMNS:
        value = getattr(s, col)
        row[col] = format_hms(value) if human else ("" if value is None else value)
    for col in TOTAL_COLUMNS:
        dev = s.deviation_s.get(col)
        row[f"deviation_{col}"] = "" if dev is None else (f"{dev:+.2f}" if human else dev)
    row["flags"] = ";".join(s.flags)
    return row


def emit_table(summaries: Sequence[MetricsSummary], fmt: str) -> str:
    """Render rows as csv, json or markdown; rows sorted by strategy then periodicity."""
    if not summaries:
        raise ValueError("nothing to emit")
    if fmt not in ("csv", "json", "markdown"):
        raise ValueError(f"unknown format {fmt!r}; choose csv, json or markdown")
    rows = sorted(summaries, key=MetricsSummary.sort_key)
    if fmt == "json":
        return json.dumps([s.to_dict() for s in rows], indent=2) + "\n"
    flat = [_flat(s, human=fmt == "markdown") for s in rows]
    header = list(flat[0])
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(r[h]) for h in header) + " |" for r in flat]
    return "\n".join(lines) + "\n"


def emit_records(records: Sequence[dict[str, Any]], fmt: str) -> str:
    if fmt not in ("csv", "json", "markdown"):
        raise ValueError(f"unknown format {fmt!r}; choose csv, json or markdown")
    if fmt == "json":
        return json.dumps(list(records), indent=2, default=str) + "\n"
    header = list(records[0]) if records else []
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(r[h]) for h in header) + " |" for r in records]
    return "\n".join(lines) + "\n"


@dataclass
class Comparison:
    overhead_pct: dict[str, float]
    checkpointing_mean_pct: float | None
    multi_agent_mean_pct: float | None
    ranking: list[str]
    slowdown: dict[str, float]
    flags: dict[str, str]


def compare_strategies(summaries: Sequence[MetricsSummary], slowdown_flag: float = 10.0) -> Comparison:
    """Percentage added to the fault-free time by one random fault per
    interval, group means, a stable ranking, and the slowdown factor under
    the burst column."""
    overhead: dict[str, float] = {}
    slowdown: dict[str, float] = {}
    flags: dict[str, str] = {}
    for s in sorted(summaries, key=MetricsSummary.sort_key):
        base, one, burst = s.total_no_failure_s, s.total_one_random_s, s.total_five_random_s
        if not isinstance(base, (int, float)):
            raise ValueError(f"{s.strategy.value}: no fault-free baseline")
        key = s.strategy.value if len({x.periodicity_s for x in summaries}) == 1 else f"{s.strategy.value}@{s.periodicity_s}"
        if isinstance(one, (int, float)):
            overhead[key] = (one - base) / base * 100
        if isinstance(burst, (int, float)):
            slowdown[key] = burst / base
            if slowdown[key] >= slowdown_flag:
                flags[key] = f"{slowdown[key]:.1f}x the fault-free time"

    def group_mean(pred) -> float | None:
        vals = [v for k, v in overhead.items() if pred(StrategyKind(k.split("@")[0]))]
        return statistics.fmean(vals) if vals else None

    ranking = sorted(overhead, key=lambda k: overhead[k])
    return Comparison(
        overhead_pct=overhead,
        checkpointing_mean_pct=group_mean(lambda k: k.checkpointing),
        multi_agent_mean_pct=group_mean(lambda k: k.proactive),
        ranking=ranking,
        slowdown=slowdown,
        flags=flags,
    )


def comparison_records(c: Comparison) -> list[dict[str, Any]]:
    rows = [{"strategy": k, "overhead_pct": round(v, 2), "slowdown": round(c.slowdown.get(k, float("nan")), 2),
             "flag": c.flags.get(k, "")} for k, v in c.overhead_pct.items()]
    rows.append({"strategy": "mean:checkpointing", "overhead_pct": _round(c.checkpointing_mean_pct), "slowdown": "",
                 "flag": ""})
    rows.append({"strategy": "mean:multi-agent", "overhead_pct": _round(c.multi_agent_mean_pct), "slowdown": "",
                 "flag": ""})
    return rows


def _round(v: float | None) -> float | str:
    return "" if v is None else round(v, 2)


def trace_summary_records(traces: Sequence[Trace]) -> list[dict[str, Any]]:
    """One row per trial: status, total, fault counts and mean per-fault costs."""
    rows = []
    for t in traces:
        rows.append({
            "seed": t.seed,
            "strategy": t.strategy,
            "status": t.status,
            "total_s": t.total_s if t.total_s is not None else "",
            "total_hms": format_hms(t.total_s),
            "faults": len(t.faults),
            "predicted": sum(f.predicted for f in t.faults),
            "false_alarms": len(t.false_alarms),
            "mean_reinstate_s": "" if t.mean_reinstate_s is None else round(t.mean_reinstate_s, 3),
            "mean_overhead_s": "" if t.mean_overhead_s is None else round(t.mean_overhead_s, 3),
            "movers": ",".join(sorted({f.handled_by for f in t.faults})),
        })
    return rows
