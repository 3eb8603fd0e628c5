"""Strategy kinds and the per-strategy, per-periodicity cost constants."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Any, Mapping


class StrategyKind(str, enum.Enum):
    AGENT = "agent"
    CORE = "core"
    HYBRID = "hybrid"
    CKPT_CENTRAL_SINGLE = "ckpt-central-single"
    CKPT_CENTRAL_MULTI = "ckpt-central-multi"
    CKPT_DECENTRAL = "ckpt-decentral"
    COLD_RESTART = "cold-restart"

    @property
    def proactive(self) -> bool:
        return self in (StrategyKind.AGENT, StrategyKind.CORE, StrategyKind.HYBRID)

    @property
    def checkpointing(self) -> bool:
        return self.value.startswith("ckpt-")


HOUR = 3600
PERIODICITIES = (HOUR, 2 * HOUR, 4 * HOUR)

_REINSTATE = {
    "ckpt-central-single": {HOUR: 848, 2 * HOUR: 940, 4 * HOUR: 987},
    "ckpt-central-multi": {HOUR: 848, 2 * HOUR: 940, 4 * HOUR: 987},
    "ckpt-decentral": {HOUR: 927, 2 * HOUR: 1043, 4 * HOUR: 1113},
    "agent": {HOUR: 0.47, 2 * HOUR: 0.47, 4 * HOUR: 0.47},
    "core": {HOUR: 0.38, 2 * HOUR: 0.38, 4 * HOUR: 0.38},
}
_OVERHEAD = {
    "ckpt-central-single": {HOUR: 485, 2 * HOUR: 617, 4 * HOUR: 713},
    "ckpt-central-multi": {HOUR: 554, 2 * HOUR: 742, 4 * HOUR: 837},
    "ckpt-decentral": {HOUR: 404, 2 * HOUR: 586, 4 * HOUR: 783},
    "agent": {HOUR: 314, 2 * HOUR: 398, 4 * HOUR: 461},
    "core": {HOUR: 267, 2 * HOUR: 337, 4 * HOUR: 389},
}


def to_ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def _number(value: Any) -> float:
    # ints stay ints so a dumped model reloads byte-for-byte
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"cost entries must be numbers, got {value!r}")
    return value


def _strategy_key(kind: StrategyKind | str) -> str:
    return StrategyKind(kind).value


@dataclass
class CostModel:
    predict_s: float = 38
    cold_restart_reinstate_s: float = 600
    reinstate_s: dict[str, dict[int, float]] = field(default_factory=lambda: copy.deepcopy(_REINSTATE))
    overhead_s: dict[str, dict[int, float]] = field(default_factory=lambda: copy.deepcopy(_OVERHEAD))

    def __post_init__(self) -> None:
        values = [self.predict_s, self.cold_restart_reinstate_s]
        values += [v for table in (self.reinstate_s, self.overhead_s) for row in table.values() for v in row.values()]
        if any(v <= 0 for v in values):
            raise ValueError("all cost model entries must be positive")

    def _lookup(self, table: dict, kind: StrategyKind | str, periodicity_s: int, what: str) -> float:
        key = _strategy_key(kind)
        if key == StrategyKind.HYBRID.value:
            raise ValueError("hybrid costs depend on the negotiated mover; look up 'agent' or 'core'")
        try:
            return table[key][int(periodicity_s)]
        except KeyError:
            raise KeyError(f"no {what} cost for {key} at periodicity {periodicity_s} s") from None

    def reinstate(self, kind: StrategyKind | str, periodicity_s: int) -> float:
        if _strategy_key(kind) == StrategyKind.COLD_RESTART.value:
            return self.cold_restart_reinstate_s
        return self._lookup(self.reinstate_s, kind, periodicity_s, "reinstate")

    def overhead(self, kind: StrategyKind | str, periodicity_s: int) -> float:
        if _strategy_key(kind) == StrategyKind.COLD_RESTART.value:
            return 0.0
        return self._lookup(self.overhead_s, kind, periodicity_s, "overhead")

    def covers(self, kind: StrategyKind | str, periodicity_s: int) -> bool:
        kinds = ["agent", "core"] if _strategy_key(kind) == "hybrid" else [kind]
        try:
            for k in kinds:
                self.reinstate(k, periodicity_s)
                self.overhead(k, periodicity_s)
        except KeyError:
            return False
        return True

    def to_dict(self, provenance: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "predict_s": self.predict_s,
            "cold_restart_reinstate_s": self.cold_restart_reinstate_s,
            "reinstate_s": {k: {str(p): v for p, v in sorted(row.items())} for k, row in self.reinstate_s.items()},
            "overhead_s": {k: {str(p): v for p, v in sorted(row.items())} for k, row in self.overhead_s.items()},
        }
        if provenance:
            out["provenance"] = self.provenance()
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CostModel":
        """Build a model from defaults overlaid with ``data`` (any subset of the
        keys produced by :meth:`to_dict`; ``provenance`` is ignored)."""
        model = cls()
        for key in ("predict_s", "cold_restart_reinstate_s"):
            if key in data:
                setattr(model, key, _number(data[key]))
        for key in ("reinstate_s", "overhead_s"):
            table = getattr(model, key)
            for kind, row in data.get(key, {}).items():
                kind = _strategy_key(kind)
                table.setdefault(kind, {})
                for period, value in row.items():
                    table[kind][int(period)] = _number(value)
        model.__post_init__()
        return model

    def provenance(self) -> dict[str, str]:
        """Where each value comes from: the published measurement it defaults to,
        or ``override``."""
        notes = {
            "predict_s": "measured time to predict one single-node failure (00:00:38)"
            if self.predict_s == 38 else "override",
            "cold_restart_reinstate_s": "administrator restart of a five-hour job (00:10:00)"
            if self.cold_restart_reinstate_s == 600 else "override",
        }
        for name, table, defaults in (("reinstate_s", self.reinstate_s, _REINSTATE),
                                      ("overhead_s", self.overhead_s, _OVERHEAD)):
            what = "reinstating execution" if name == "reinstate_s" else "overheads"
            for kind, row in sorted(table.items()):
                for period, value in sorted(row.items()):
                    if defaults.get(kind, {}).get(period) == value:
                        notes[f"{name}.{kind}.{period}"] = (
                            f"measured {what}, {period // HOUR} h checkpoint periodicity ({_clock(value)})"
                        )
                    else:
                        notes[f"{name}.{kind}.{period}"] = "override"
        return notes


def _clock(seconds: float) -> str:
    if seconds < 1:
        return f"00:00:{seconds:.2f}"
    s = int(seconds)
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"
