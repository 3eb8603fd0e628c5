"""Fault injection schedules and a statistical failure predictor."""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import ComputeCore, CoreStatus

DEFAULT_MEAN_OFFSET_S = 1874  # 31 m 14 s into a one-hour interval


class FaultMode(str, enum.Enum):
    PERIODIC = "periodic"
    RANDOM = "random"
    RANDOM_FIXED_MEAN = "random-fixed-mean"


class FaultTarget(str, enum.Enum):
    UNIFORM_RANDOM_CORE = "uniform-random-core"
    FIXED_CORE = "fixed-core"


class Outcome(str, enum.Enum):
    TRUE_PREDICTION = "true-prediction"
    FALSE_PREDICTION = "false-prediction"


@dataclass
class FaultSpec:
    mode: FaultMode = FaultMode.PERIODIC
    offset_s: float = 900
    failures_per_interval: int = 1
    target: FaultTarget = FaultTarget.UNIFORM_RANDOM_CORE
    fixed_core: int = 0
    mean_offset_s: float = DEFAULT_MEAN_OFFSET_S
    # False drops faults from a final interval shorter than the checkpoint period.
    truncated_interval_faults: bool = True

    def __post_init__(self) -> None:
        self.mode = FaultMode(self.mode)
        self.target = FaultTarget(self.target)
        if self.offset_s < 0 or self.mean_offset_s < 0:
            raise ValueError("fault offsets must be non-negative")
        if self.failures_per_interval < 0:
            raise ValueError("failures_per_interval must be non-negative")


@dataclass
class FaultSchedule:
    instants: list[tuple[float, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        times = [t for t, _ in self.instants]
        if times != sorted(times):
            raise ValueError("fault instants must be sorted")

    def __len__(self) -> int:
        return len(self.instants)

    def __iter__(self):
        return iter(self.instants)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.instants]

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"time_s": t, "core": c}) + "\n" for t, c in self.instants)

    @classmethod
    def from_jsonl(cls, text: str) -> "FaultSchedule":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        return cls([(r["time_s"], r["core"]) for r in rows])


@dataclass
class PredictorParams:
    coverage: float = 0.29
    precision: float = 0.64
    lead_time_s: float = 38

    def __post_init__(self) -> None:
        if not 0 <= self.coverage <= 1 or not 0 <= self.precision <= 1:
            raise ValueError("coverage and precision must lie in [0, 1]")
        if self.lead_time_s <= 0:
            raise ValueError("lead_time_s must be positive")

    def false_alarm_rate_per_hour(self, true_predictions_per_hour: float) -> float:
        """Rate of false predictions that makes true/(true+false) equal precision."""
        if true_predictions_per_hour == 0 or self.precision == 1:
            return 0.0
        if self.precision == 0:
            raise ValueError("precision 0 with true predictions implies an unbounded false-alarm rate")
        return true_predictions_per_hour * (1 - self.precision) / self.precision


@dataclass(frozen=True)
class Prediction:
    core: int
    issued_at_s: float
    outcome: Outcome


@dataclass(frozen=True)
class ProbeReport:
    prober: int
    probed: int
    at_s: float
    alive: bool


def _ms_floor(x: float) -> float:
    return int(x * 1000) / 1000


def sample_random_offset(interval_len_s: float, rng: random.Random) -> float:
    """Uniform offset in [0, interval_len_s), at millisecond resolution."""
    if interval_len_s <= 0:
        raise ValueError("interval length must be positive")
    return min(_ms_floor(rng.random() * interval_len_s), interval_len_s - 0.001)


def _intervals(checkpoints: Sequence[float], horizon_s: float) -> list[tuple[float, float]]:
    marks = [0.0] + [float(c) for c in checkpoints] + [float(horizon_s)]
    return [(a, b) for a, b in zip(marks, marks[1:]) if b > a]


def build_fault_schedule(
    spec: FaultSpec,
    checkpoints: Sequence[float],
    horizon_s: float,
    rng: random.Random,
    cores: Sequence[int] = (0,),
    period_s: float | None = None,
) -> FaultSchedule:
    """Place faults in each interval delimited by the start, the checkpoints and
    the horizon.

    An interval shorter than ``period_s`` (default: the longest interval) is
    truncated; with ``spec.truncated_interval_faults`` off it receives no faults.
    """
    if list(checkpoints) != sorted(checkpoints):
        raise ValueError("checkpoints must be sorted")
    if any(c < 0 or c > horizon_s for c in checkpoints):
        raise ValueError("checkpoints must lie within the horizon")
    intervals = _intervals(checkpoints, horizon_s)
    if period_s is None:
        period_s = max((b - a for a, b in intervals), default=0)
    instants: list[tuple[float, int]] = []

    def pick_core() -> int:
        if spec.target is FaultTarget.FIXED_CORE:
            return spec.fixed_core
        return rng.choice(list(cores))

    for start, end in intervals:
        length = end - start
        if length < period_s and not spec.truncated_interval_faults:
            continue
        for _ in range(spec.failures_per_interval):
            if spec.mode is FaultMode.RANDOM:
                offset = sample_random_offset(length, rng)
            else:
                offset = spec.offset_s if spec.mode is FaultMode.PERIODIC else spec.mean_offset_s
                if offset >= length:
                    continue
            instants.append((start + offset, pick_core()))
    instants.sort(key=lambda x: x[0])
    return FaultSchedule(instants)


def classify_fault(fault_time_s: float, core: int, params: PredictorParams, rng: random.Random) -> Prediction | None:
    """Return the true prediction issued ahead of the fault, or None when the
    fault goes unpredicted."""
    if rng.random() < params.coverage:
        return Prediction(core, max(0.0, fault_time_s - params.lead_time_s), Outcome.TRUE_PREDICTION)
    return None


def emit_false_predictions(
    params: PredictorParams,
    horizon_s: float,
    rng: random.Random,
    true_predictions_per_hour: float,
    cores: Sequence[int] = (0,),
) -> list[Prediction]:
    """Poisson arrivals of predictions that never materialise."""
    rate = params.false_alarm_rate_per_hour(true_predictions_per_hour) / 3600.0
    out: list[Prediction] = []
    if rate == 0:
        return out
    t = rng.expovariate(rate)
    while t < horizon_s:
        out.append(Prediction(rng.choice(list(cores)), _ms_floor(t), Outcome.FALSE_PREDICTION))
        t += rng.expovariate(rate)
    return out


def probe(prober: ComputeCore, probed: ComputeCore, at_s: float) -> ProbeReport:
    """An 'are you alive' signal; reflects the probed core's status at ``at_s``."""
    return ProbeReport(prober.id, probed.id, at_s, probed.status is not CoreStatus.FAILED)


def predicted_fraction(outcomes: Iterable[Prediction | None]) -> float:
    outcomes = list(outcomes)
    return sum(o is not None for o in outcomes) / len(outcomes) if outcomes else 0.0
