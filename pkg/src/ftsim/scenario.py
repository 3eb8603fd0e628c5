"""Scenario files: JSON schema, loading, dumping and the named presets."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .costs import CostModel, StrategyKind
from .engine import ConfigError, EmulationSpec, Scenario, TopologySpec
from .failures import FaultSpec, PredictorParams
from .model import JobSpec
from .strategies import ProtocolLatency

_STRATEGIES = [k.value for k in StrategyKind]
_NUM = {"type": "number"}
_INT = {"type": "integer"}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_COST_TABLE = {
    "type": "object",
    "propertyNames": {"enum": _STRATEGIES},
    "additionalProperties": {"type": "object", "patternProperties": {"^[0-9]+$": {"type": "number", "exclusiveMinimum": 0}},
                             "additionalProperties": False},
}

SCHEMA: dict = _obj(
    {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "job": _obj(
            {
                "kind": {"enum": ["reduction-sum", "genome-search"]},
                "total_data_kb": {"type": "integer", "minimum": 1},
                "fan_widths": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "process_size_kb": {"type": "integer", "minimum": 1},
            },
            ("kind", "total_data_kb", "fan_widths"),
        ),
        "strategy": {"enum": _STRATEGIES},
        "backstop": {"enum": [k for k in _STRATEGIES if k not in ("agent", "core", "hybrid")] + [None]},
        "base_duration_s": {"type": "number", "exclusiveMinimum": 0},
        "periodicity_s": {"type": "integer", "minimum": 1},
        "faults": _obj({
            "mode": {"enum": ["periodic", "random", "random-fixed-mean"]},
            "offset_s": {"type": "number", "minimum": 0},
            "failures_per_interval": {"type": "integer", "minimum": 0},
            "target": {"enum": ["uniform-random-core", "fixed-core"]},
            "fixed_core": {"type": "integer", "minimum": 0},
            "mean_offset_s": {"type": "number", "minimum": 0},
            "truncated_interval_faults": {"type": "boolean"},
        }),
        "predictor": _obj({
            "coverage": {"type": "number", "minimum": 0, "maximum": 1},
            "precision": {"type": "number", "minimum": 0, "maximum": 1},
            "lead_time_s": {"type": "number", "exclusiveMinimum": 0},
        }),
        "cost_model": _obj({
            "predict_s": {"type": "number", "exclusiveMinimum": 0},
            "cold_restart_reinstate_s": {"type": "number", "exclusiveMinimum": 0},
            "reinstate_s": _COST_TABLE,
            "overhead_s": _COST_TABLE,
            "provenance": {"type": "object"},
        }),
        "topology": _obj({
            "kind": {"enum": ["complete", "ring", "grid"]},
            "size": {"type": ["integer", "null"], "minimum": 1},
            "rows": {"type": ["integer", "null"], "minimum": 1},
            "cols": {"type": ["integer", "null"], "minimum": 1},
            "spare_cores": {"type": "integer", "minimum": 0},
        }),
        "checkpoint_servers": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "tie_break": {"enum": ["agent", "core"]},
        "false_predictions": {"type": "boolean"},
        "latency": _obj({k: {"type": "integer", "minimum": 0} for k in ProtocolLatency.__dataclass_fields__}),
        "emulation": _obj({
            "ticks": {"type": "integer", "minimum": 1},
            "genome_length": {"type": "integer", "minimum": 7},
            "n_patterns": {"type": "integer", "minimum": 1},
            "planted_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "replication": {"type": "integer", "minimum": 1},
            "items_per_leaf": {"type": "integer", "minimum": 1},
            "jitter_ms": {"type": "integer", "minimum": 0},
        }),
        "mode": {"enum": ["timing", "emulation"]},
        "seed": _INT,
        "trials": {"type": "integer", "minimum": 1},
        "suite": _obj(
            {
                "periodicities_s": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "strategies": {"type": "array", "items": {"enum": _STRATEGIES}, "minItems": 1},
                "periodic_offset_s": {"type": "object", "additionalProperties": _NUM},
                "mean_offset_s": {"type": "object", "additionalProperties": _NUM},
                "burst_failures": {"type": "integer", "minimum": 1},
                "random_mode": {"enum": ["random", "random-fixed-mean"]},
                "reference": {"type": "string"},
            },
            ("periodicities_s", "strategies"),
        ),
    },
    ("job",),
)


@dataclass
class SuiteSpec:
    """A grid of cells: every strategy at every periodicity, each under no
    faults, one periodic fault per interval, one random fault per interval and
    ``burst_failures`` random faults per interval."""

    periodicities_s: list[int]
    strategies: list[StrategyKind]
    periodic_offset_s: dict[int, float] = field(default_factory=dict)
    mean_offset_s: dict[int, float] = field(default_factory=dict)
    burst_failures: int = 5
    random_mode: str = "random-fixed-mean"
    reference: str | None = None

    def __post_init__(self) -> None:
        self.strategies = [StrategyKind(s) for s in self.strategies]
        self.periodic_offset_s = {int(k): float(v) for k, v in self.periodic_offset_s.items()}
        self.mean_offset_s = {int(k): float(v) for k, v in self.mean_offset_s.items()}

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "periodicities_s": list(self.periodicities_s),
            "strategies": [s.value for s in self.strategies],
            "periodic_offset_s": {str(k): v for k, v in sorted(self.periodic_offset_s.items())},
            "mean_offset_s": {str(k): v for k, v in sorted(self.mean_offset_s.items())},
            "burst_failures": self.burst_failures,
            "random_mode": self.random_mode,
        }
        if self.reference:
            out["reference"] = self.reference
        return out


def validate_document(doc: Any) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    if "suite" not in doc and "strategy" not in doc:
        raise ConfigError("schema violation at <root>: 'strategy' is required unless a 'suite' is given")


def scenario_from_dict(doc: dict) -> tuple[Scenario, SuiteSpec | None]:
    """Validate a scenario document and build the scenario (plus the suite when present)."""
    validate_document(doc)
    doc = copy.deepcopy(doc)
    suite = SuiteSpec(**doc.pop("suite")) if "suite" in doc else None
    for key in ("name", "description"):
        doc.pop(key, None)
    try:
        scenario = Scenario(
            job=JobSpec(**doc.pop("job")),
            strategy=doc.pop("strategy", suite.strategies[0].value if suite else None),
            faults=FaultSpec(**doc.pop("faults", {})),
            predictor=PredictorParams(**doc.pop("predictor", {})),
            cost_model=CostModel.from_dict(doc.pop("cost_model", {})),
            topology=TopologySpec(**doc.pop("topology", {})),
            latency=ProtocolLatency(**doc.pop("latency", {})),
            emulation=EmulationSpec(**doc.pop("emulation", {})),
            **doc,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return scenario, suite


def scenario_to_dict(scenario: Scenario, suite: SuiteSpec | None = None) -> dict:
    d = asdict(scenario)
    out = {
        "job": {k: v for k, v in d["job"].items() if v is not None and k != "patterns"},
        "strategy": scenario.strategy.value,
        "backstop": scenario.backstop.value if scenario.backstop else None,
        "base_duration_s": scenario.base_duration_s,
        "periodicity_s": scenario.periodicity_s,
        "faults": d["faults"],
        "predictor": d["predictor"],
        "cost_model": scenario.cost_model.to_dict(),
        "topology": d["topology"],
        "checkpoint_servers": list(scenario.checkpoint_servers),
        "tie_break": scenario.tie_break,
        "false_predictions": scenario.false_predictions,
        "latency": d["latency"],
        "emulation": d["emulation"],
        "mode": scenario.mode,
        "seed": scenario.seed,
        "trials": scenario.trials,
    }
    out["job"]["kind"] = scenario.job.kind.value
    out["faults"]["mode"] = scenario.faults.mode.value
    out["faults"]["target"] = scenario.faults.target.value
    if suite is not None:
        out["suite"] = suite.to_dict()
    return out


def load_scenario_file(path: str | Path) -> tuple[Scenario, SuiteSpec | None]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def digest(doc: dict) -> str:
    """sha256 of the canonical JSON encoding."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


_IDEAL_PREDICTOR = {"coverage": 1.0, "precision": 1.0, "lead_time_s": 38}
_GENOME_Z4 = {"kind": "genome-search", "total_data_kb": 2 ** 19, "fan_widths": [3]}
_GENOME_Z12 = {"kind": "genome-search", "total_data_kb": 2 ** 19, "fan_widths": [11]}

PRESETS: dict[str, dict] = {
    "table1": {
        "name": "table1",
        "description": "one-hour job between two checkpoints an hour apart; 15 min periodic offset, "
                       "31 min 14 s mean random offset",
        "job": _GENOME_Z4,
        "base_duration_s": 3600,
        "periodicity_s": 3600,
        "predictor": _IDEAL_PREDICTOR,
        "seed": 0,
        "suite": {
            "periodicities_s": [3600],
            "strategies": ["ckpt-central-single", "ckpt-central-multi", "ckpt-decentral", "agent", "core", "hybrid"],
            "periodic_offset_s": {"3600": 900},
            "mean_offset_s": {"3600": 1874},
            "burst_failures": 5,
            "random_mode": "random-fixed-mean",
            "reference": "one-hour",
        },
    },
    "table2": {
        "name": "table2",
        "description": "five-hour job with one, two and four hour checkpoint periodicity; periodic offsets "
                       "14/28/56 min, mean random offsets 31:14, 1:03:22, 2:08:47",
        "job": _GENOME_Z4,
        "base_duration_s": 18000,
        "periodicity_s": 3600,
        "predictor": _IDEAL_PREDICTOR,
        "faults": {"truncated_interval_faults": True},
        "seed": 0,
        "suite": {
            "periodicities_s": [3600, 7200, 14400],
            "strategies": ["ckpt-central-single", "ckpt-central-multi", "ckpt-decentral", "agent", "core",
                           "cold-restart"],
            "periodic_offset_s": {"3600": 840, "7200": 1680, "14400": 3360},
            "mean_offset_s": {"3600": 1874, "7200": 3802, "14400": 7727},
            "burst_failures": 5,
            "random_mode": "random-fixed-mean",
            "reference": "five-hour",
        },
    },
    "genome-z4": {
        "name": "genome-z4",
        "description": "three searchers and one combiner, 2^19 KB of data, one periodic fault per hour",
        "job": _GENOME_Z4,
        "strategy": "hybrid",
        "base_duration_s": 3600,
        "periodicity_s": 3600,
        "faults": {"mode": "periodic", "offset_s": 900},
        "predictor": _IDEAL_PREDICTOR,
        "emulation": {"genome_length": 70000, "n_patterns": 20, "ticks": 20},
        "seed": 0,
    },
    "genome-z12": {
        "name": "genome-z12",
        "description": "eleven searchers and one combiner, 512 MB of data, one periodic fault per hour",
        "job": _GENOME_Z12,
        "strategy": "hybrid",
        "base_duration_s": 3600,
        "periodicity_s": 3600,
        "faults": {"mode": "periodic", "offset_s": 900},
        "predictor": _IDEAL_PREDICTOR,
        "emulation": {"genome_length": 70000, "n_patterns": 20, "ticks": 20},
        "seed": 0,
    },
}


def preset(name: str) -> tuple[Scenario, SuiteSpec | None]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return scenario_from_dict(PRESETS[name])
