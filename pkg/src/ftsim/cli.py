"""ftsim command line: run scenarios or table suites, dump the cost model."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .costs import CostModel
from .engine import ConfigError, InvariantViolation, fault_free_result, run_trials
from .model import decompose_job
from .reporting import (
    compare_strategies,
    comparison_records,
    emit_records,
    emit_table,
    run_suite,
    trace_summary_records,
)
from .scenario import PRESETS, load_scenario_file, preset

EXIT_OK, EXIT_CONFIG, EXIT_JOB_FAILED = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftsim", description="Fault-tolerance strategy simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or a preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario JSON file")
    src.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--seed", type=int, help="base seed (falls back to $FTSIM_SEED, then the file)")
    run.add_argument("--trials", type=int)
    run.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    run.add_argument("--out", type=Path, help="write the report here instead of stdout")
    run.add_argument("--mode", choices=("timing", "emulation"))
    run.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")
    run.add_argument("--trace", type=Path, help="write the event trace(s) as JSON lines")

    dump = sub.add_parser("dump-costmodel", help="print the cost model with provenance")
    dump.add_argument("--override", type=Path, help="JSON file overlaid on the defaults")
    dump.add_argument("--out", type=Path)
    return p


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _seed(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("FTSIM_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"FTSIM_SEED must be an integer, got {env!r}") from None


def cmd_run(args: argparse.Namespace) -> int:
    scenario, suite = load_scenario_file(args.scenario) if args.scenario else preset(args.preset)
    seed = _seed(args.seed)
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    if args.trials is not None:
        scenario = replace(scenario, trials=args.trials)
    if args.mode is not None:
        scenario = replace(scenario, mode=args.mode)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    scenario.validate()

    if suite is not None:
        rows = run_suite(scenario, suite, args.jobs)
        comparison = comparison_records(compare_strategies([r for r in rows if r.periodicity_s == min(suite.periodicities_s)]))
        if args.format == "json":
            text = json.dumps({"rows": [r.to_dict() for r in rows], "comparison": comparison}, indent=2) + "\n"
        elif args.format == "csv":
            text = emit_table(rows, "csv")
        else:
            text = emit_table(rows, "markdown") + "\n" + emit_records(comparison, "markdown")
        _write(text, args.out)
        return EXIT_JOB_FAILED if any("job-failed" in r.flags for r in rows) else EXIT_OK

    traces, agg = run_trials(scenario, args.jobs)
    if args.trace:
        with args.trace.open("w") as fh:
            for t in traces:
                fh.write(t.to_jsonl())
    records = trace_summary_records(traces)
    z = decompose_job(scenario.job).scenario_dependency_count()
    for r in records:
        r["z"] = z
        r["mode"] = scenario.mode
    if scenario.mode == "emulation":
        for r, t in zip(records, traces):
            if t.status == "completed":
                r["result_matches_fault_free"] = t.result == fault_free_result(scenario, t.seed)
            else:
                r["result_matches_fault_free"] = ""
    if args.format == "json":
        text = json.dumps({"trials": records, "aggregate": agg.__dict__}, indent=2, default=str) + "\n"
    else:
        text = emit_records(records, args.format)
    _write(text, args.out)
    return EXIT_OK if all(t.status == "completed" for t in traces) else EXIT_JOB_FAILED


def cmd_dump_costmodel(args: argparse.Namespace) -> int:
    model = CostModel()
    if args.override:
        try:
            data = json.loads(args.override.read_text())
        except FileNotFoundError:
            raise ConfigError(f"override file not found: {args.override}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.override}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        try:
            model = CostModel.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad cost model override: {exc}") from None
    _write(json.dumps(model.to_dict(provenance=True), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_dump_costmodel(args)
    except ConfigError as exc:
        print(f"ftsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"ftsim: runtime failure: {exc}", file=sys.stderr)
        return EXIT_JOB_FAILED
