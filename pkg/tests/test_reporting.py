import csv
import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftsim.costs import StrategyKind
from ftsim.engine import Scenario, run_scenario
from ftsim.failures import FaultSpec, PredictorParams
from ftsim.model import JobSpec
from ftsim.reporting import (
    FLAG_FAILED,
    FLAG_RESTART,
    FLAG_TRUNCATED,
    GAP,
    MetricsSummary,
    compare_strategies,
    emit_records,
    emit_table,
    format_hms,
    parse_hms,
    reproduce_table1,
    reproduce_table2,
    summarize,
    trace_summary_records,
)

JOB = JobSpec("genome-search", 2 ** 19, [3])
IDEAL = PredictorParams(1.0, 1.0, 38)


@pytest.fixture(scope="module")
def one_hour():
    return reproduce_table1()


@pytest.fixture(scope="module")
def five_hour():
    return reproduce_table2()


def test_format_examples():
    assert format_hms(5833) == "01:37:13"
    assert format_hms(0.47) == "00:00:0.47"
    assert format_hms(259850) == "72:10:50"
    assert format_hms(3952.47) == "01:05:52"
    assert format_hms(None) == "-"
    assert format_hms(GAP) == GAP


@given(st.integers(0, 10 ** 7))
def test_hms_round_trip(seconds):
    assert parse_hms(format_hms(seconds)) == seconds


def test_summarize_one_row():
    s = Scenario(JOB, "ckpt-central-single", faults=FaultSpec("periodic", 900, 1))
    none = Scenario(JOB, "ckpt-central-single", faults=FaultSpec("periodic", 900, 0))
    row = summarize("ckpt-central-single", 3600, {"none": [run_scenario(none)], "periodic": [run_scenario(s)]},
                    reference="one-hour")
    assert row.reinstate_periodic_s == 848 and row.overhead_periodic_s == 485
    assert row.total_no_failure_s == 3600 and row.total_one_periodic_s == 5833
    assert row.total_one_random_s == GAP and row.reinstate_random_s == GAP
    assert row.predict_s is None
    assert row.deviation_s["total_one_periodic_s"] == 0
    assert row.deviation_s["total_one_random_s"] is None


def test_failed_cell_is_a_gap_not_zero():
    s = Scenario(JOB, "core", faults=FaultSpec("periodic", 900, 1), predictor=PredictorParams(0.0, 1.0, 38))
    row = summarize("core", 3600, {"periodic": [run_scenario(s)]})
    assert row.total_one_periodic_s == GAP
    assert FLAG_FAILED in row.flags


def test_one_hour_rows(one_hour):
    assert len(one_hour) == 6
    by = {r.strategy.value: r for r in one_hour}
    assert by["ckpt-decentral"].total_five_random_s == 19625
    assert by["core"].total_one_random_s == pytest.approx(3905.38)
    assert by["agent"].predict_s == 38
    assert all(not r.flags for r in one_hour)


def test_five_hour_rows_and_flags(five_hour):
    keys = [(r.strategy.value, r.periodicity_s) for r in five_hour]
    assert keys == sorted(keys, key=lambda k: (list(StrategyKind).index(StrategyKind(k[0])), k[1]))
    assert len(five_hour) == 5 * 3 + 1
    restart = [r for r in five_hour if r.strategy is StrategyKind.COLD_RESTART]
    assert len(restart) == 1 and FLAG_RESTART in restart[0].flags
    assert restart[0].overhead_periodic_s is None
    for r in five_hour:
        assert (FLAG_TRUNCATED in r.flags) == (18000 % r.periodicity_s != 0)


def test_csv_has_one_line_per_row(five_hour):
    text = emit_table(five_hour, "csv")
    assert len(text.splitlines()) == len(five_hour) + 1
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows[0]["strategy"] == list(StrategyKind)[0].value
    assert "deviation_total_one_periodic_s" in rows[0]


def test_markdown_uses_hms(one_hour):
    text = emit_table(one_hour, "markdown")
    assert "01:37:13" in text and "00:00:0.38" in text
    assert len(text.splitlines()) == 2 + len(one_hour)


def test_json_round_trip(five_hour):
    back = [MetricsSummary.from_dict(d) for d in json.loads(emit_table(five_hour, "json"))]
    assert back == sorted(five_hour, key=MetricsSummary.sort_key)


def test_emit_rejects_unknown_format(one_hour):
    with pytest.raises(ValueError):
        emit_table(one_hour, "xml")
    with pytest.raises(ValueError):
        emit_table([], "csv")


def test_comparison(one_hour):
    c = compare_strategies(one_hour)
    assert c.ranking[:2] == ["core", "hybrid"]
    assert c.ranking[-1] == "ckpt-central-multi"
    assert c.checkpointing_mean_pct == pytest.approx(89.70, abs=0.01)
    assert c.multi_agent_mean_pct == pytest.approx(8.92, abs=0.01)
    assert c.slowdown["ckpt-central-single"] == pytest.approx(19635 / 3600)
    assert not c.flags


def test_comparison_flags_extreme_slowdown():
    rows = [MetricsSummary("cold-restart", 3600, total_no_failure_s=100, total_one_random_s=150,
                           total_five_random_s=2000)]
    c = compare_strategies(rows)
    assert "cold-restart" in c.flags and c.slowdown["cold-restart"] == 20


def test_comparison_needs_baseline():
    with pytest.raises(ValueError):
        compare_strategies([MetricsSummary("agent", 3600)])


def test_trace_records():
    t = run_scenario(Scenario(JOB, "agent", faults=FaultSpec("periodic", 900, 1), predictor=IDEAL))
    (rec,) = trace_summary_records([t])
    assert rec["total_hms"] == "01:05:52" and rec["movers"] == "agent" and rec["predicted"] == 1
    assert emit_records([rec], "csv").count("\n") == 2
