"""Deterministic discrete-event simulation of one job under one fault-tolerance
strategy.

The job advances a nominal progress clock while it is not stalled. Progress
milestones (compute ticks, checkpoints, predictions, faults, completion) fire
when the progress clock reaches them; wall-clock events (migrations, core
repairs) sit in a heap. Everything is kept in integer milliseconds.
"""

from __future__ import annotations

import copy
import heapq
import itertools
import json
import math
import pickle
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

from .costs import CostModel, StrategyKind, to_ms
from .failures import (
    FaultSchedule,
    FaultSpec,
    Outcome,
    Prediction,
    PredictorParams,
    build_fault_schedule,
    classify_fault,
    emit_false_predictions,
)
from .model import (
    Agent,
    CoreStatus,
    DependencyGraph,
    JobSpec,
    Topology,
    VirtualCore,
    WorkloadKind,
    decompose_job,
    place_on_agents,
    place_on_vcores,
)
from .strategies import (
    CheckpointRecord,
    NoViableTargetError,
    ProtocolLatency,
    agent_migrate,
    checkpoint_create,
    checkpoint_instants,
    checkpoint_rollback,
    cold_restart_recover,
    core_migrate,
    negotiate,
)
from .workloads import build_programs, genome_search, random_dictionary, synthetic_store

MODES = ("timing", "emulation")


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass
class TopologySpec:
    kind: str = "complete"
    size: int | None = None
    rows: int | None = None
    cols: int | None = None
    spare_cores: int = 1

    def build(self, n_subjobs: int) -> Topology:
        if self.kind == "grid":
            if not self.rows or not self.cols:
                raise ConfigError("grid topology needs rows and cols")
            return Topology.grid(self.rows, self.cols)
        size = self.size if self.size is not None else n_subjobs + self.spare_cores
        if self.kind == "complete":
            return Topology.complete(size)
        if self.kind == "ring":
            return Topology.ring(size)
        raise ConfigError(f"unknown topology kind {self.kind!r}")


@dataclass
class EmulationSpec:
    ticks: int = 20
    genome_length: int = 70_000
    n_patterns: int = 20
    planted_fraction: float = 0.5
    replication: int = 1
    items_per_leaf: int = 64
    jitter_ms: int = 0


@dataclass
class Scenario:
    job: JobSpec
    strategy: StrategyKind
    base_duration_s: float = 3600
    periodicity_s: int = 3600
    faults: FaultSpec = field(default_factory=FaultSpec)
    predictor: PredictorParams = field(default_factory=PredictorParams)
    cost_model: CostModel = field(default_factory=CostModel)
    topology: TopologySpec = field(default_factory=TopologySpec)
    backstop: StrategyKind | None = None
    checkpoint_servers: list[int] = field(default_factory=lambda: [0])
    tie_break: str = "core"
    false_predictions: bool = False
    latency: ProtocolLatency = field(default_factory=ProtocolLatency)
    emulation: EmulationSpec = field(default_factory=EmulationSpec)
    mode: str = "timing"
    seed: int = 0
    trials: int = 1

    def __post_init__(self) -> None:
        self.strategy = StrategyKind(self.strategy)
        if self.backstop is not None:
            self.backstop = StrategyKind(self.backstop)

    def validate(self) -> None:
        """Raise ConfigError for anything that would make the run meaningless."""
        if self.base_duration_s <= 0:
            raise ConfigError("base_duration_s must be positive")
        if self.periodicity_s <= 0:
            raise ConfigError("periodicity_s must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tie_break not in ("agent", "core"):
            raise ConfigError("tie_break must be 'agent' or 'core'")
        if self.emulation.ticks < 1:
            raise ConfigError("emulation ticks must be >= 1")
        if self.backstop is not None:
            if not self.strategy.proactive:
                raise ConfigError("a backstop only applies to proactive strategies")
            if self.backstop.proactive:
                raise ConfigError("the backstop must be a checkpointing strategy or cold-restart")
        if self.strategy.proactive and self.cost_model.predict_s != self.predictor.lead_time_s:
            raise ConfigError(
                f"predict_s ({self.cost_model.predict_s}) must equal the predictor lead time "
                f"({self.predictor.lead_time_s})"
            )
        for kind in filter(None, (self.strategy, self.backstop)):
            if not self.cost_model.covers(kind, self.periodicity_s):
                raise ConfigError(f"cost model has no entry for {kind.value} at periodicity {self.periodicity_s} s")
        try:
            graph = decompose_job(self.job)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        topology = self.topology.build(len(graph))
        if len(topology) < len(graph) + 1:
            raise ConfigError(f"{len(graph)} sub-jobs need at least {len(graph) + 1} cores, topology has {len(topology)}")
        if self.faults.target.value == "fixed-core" and self.faults.fixed_core not in range(len(graph)):
            raise ConfigError(f"fixed fault core {self.faults.fixed_core} hosts no sub-job")
        if any(s not in topology.cores for s in self.checkpoint_servers) or not self.checkpoint_servers:
            raise ConfigError("checkpoint servers must be non-empty core ids of the topology")


@dataclass
class Event:
    at_ms: int
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"at_ms": self.at_ms, "kind": self.kind, **self.payload}, sort_keys=True)


@dataclass
class FaultRecord:
    nominal_s: float
    at_s: float
    core: int
    subjob: str
    predicted: bool
    lost_work_s: float = 0.0
    predict_s: float = 0.0
    reinstate_s: float = 0.0
    overhead_s: float = 0.0
    handled_by: str = ""


@dataclass
class Trace:
    strategy: str
    seed: int
    events: list[Event] = field(default_factory=list)
    status: str = "running"
    faults: list[FaultRecord] = field(default_factory=list)
    false_alarms: list[FaultRecord] = field(default_factory=list)
    total_s: float | None = None
    result: Any = None

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def of_kind(self, *kinds: str) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    @property
    def mean_reinstate_s(self) -> float | None:
        return statistics.fmean(f.reinstate_s for f in self.faults) if self.faults else None

    @property
    def mean_overhead_s(self) -> float | None:
        return statistics.fmean(f.overhead_s for f in self.faults) if self.faults else None


@dataclass
class Aggregate:
    trials: int
    completed: int
    total_s: tuple[float, float, float] | None
    reinstate_s: tuple[float, float, float] | None
    overhead_s: tuple[float, float, float] | None


def _stats(values: list[float]) -> tuple[float, float, float] | None:
    if not values:
        return None
    return statistics.fmean(values), min(values), max(values)


def aggregate(traces: list[Trace]) -> Aggregate:
    """Mean, min and max of total, reinstate and overhead over completed traces."""
    done = [t for t in traces if t.status == "completed"]
    per_fault = [f for t in done for f in t.faults]
    return Aggregate(
        trials=len(traces),
        completed=len(done),
        total_s=_stats([t.total_s for t in done]),
        reinstate_s=_stats([f.reinstate_s for f in per_fault]),
        overhead_s=_stats([f.overhead_s for f in per_fault]),
    )


@dataclass(order=True)
class _Milestone:
    progress_ms: int
    rank: int
    seq: int
    kind: str = field(compare=False)
    data: dict = field(compare=False, default_factory=dict)
    repeatable: bool = field(compare=False, default=False)
    fired: bool = field(compare=False, default=False)


# same-progress ordering: work before checkpoint before faults before completion
_RANK = {"tick": 0, "checkpoint": 1, "predict": 2, "false-predict": 2, "fault": 2, "complete": 3}


def leaf_items_for(graph: DependencyGraph, seed: int, per_leaf: int) -> dict[str, list[int]]:
    rng = random.Random(f"{seed}:leaves")
    return {j.id: [rng.randrange(-10 ** 6, 10 ** 6) for _ in range(per_leaf)] for j in graph.leaves()}


def genome_inputs(scenario: Scenario, seed: int):
    store = synthetic_store(seed, scenario.emulation.genome_length)
    patterns = random_dictionary(seed, scenario.emulation.n_patterns, store, scenario.emulation.planted_fraction)
    return store, patterns


def fault_free_result(scenario: Scenario, seed: int | None = None) -> Any:
    """The workload result computed on a single node, without the simulator."""
    seed = scenario.seed if seed is None else seed
    graph = decompose_job(scenario.job)
    if scenario.job.kind is WorkloadKind.GENOME_SEARCH:
        return genome_search(*genome_inputs(scenario, seed))
    items = leaf_items_for(graph, seed, scenario.emulation.items_per_leaf)
    return sum(sum(v) for v in items.values())


class _Run:
    def __init__(self, scenario: Scenario):
        s = self.s = scenario
        self.graph = decompose_job(s.job)
        self.topology = s.topology.build(len(self.graph))
        self.trace = Trace(s.strategy.value, s.seed)
        self.now = 0
        self.progress = 0
        self.busy_until = 0
        self.heap: list[tuple[int, int, str, dict]] = []
        self.seq = itertools.count()
        self.records: list[CheckpointRecord] = []
        self.base_ms = to_ms(s.base_duration_s)
        self.lead_ms = to_ms(s.predictor.lead_time_s)
        self.job_z = self.graph.scenario_dependency_count()
        self.emulating = s.mode == "emulation"

        cores = self.topology.alive()
        self.agents: dict[str, Agent] = {}
        if s.strategy in (StrategyKind.AGENT, StrategyKind.HYBRID):
            self.agents = {a.payload: a for a in place_on_agents(self.graph, cores)}
        self.vcores = {c.id: VirtualCore(c.id, c.id) for c in cores}
        placement = place_on_vcores(self.graph, list(self.vcores.values()), self.topology)
        self.host = {job: vid for job, vid in placement.items()}
        for job, vid in placement.items():
            if job in self.agents:
                self.vcores[vid].hosted = self.agents[job].id
        self.initial_owner = {core: job for job, core in self.host.items()}

        self.programs: dict = {}
        self.states: dict[str, dict] = {}
        if self.emulating:
            self._build_programs()
        self.milestones = self._build_milestones()
        self.pointer = 0

    # ---------------------------------------------------------------- set-up
    def _build_programs(self) -> None:
        s, em = self.s, self.s.emulation
        if s.job.kind is WorkloadKind.GENOME_SEARCH:
            store, patterns = genome_inputs(s, s.seed)
            self.programs = build_programs(self.graph, em.ticks, store=store, patterns=patterns,
                                           replication=em.replication)
        else:
            items = leaf_items_for(self.graph, s.seed, em.items_per_leaf)
            self.programs = build_programs(self.graph, em.ticks, leaf_items=items)
        self.initial_states = {k: p.initial_state() for k, p in self.programs.items()}
        self.states = copy.deepcopy(self.initial_states)

    def _uses_checkpoints(self) -> bool:
        kind = self.recovery_kind
        return kind is not None and kind.checkpointing

    @property
    def recovery_kind(self) -> StrategyKind | None:
        return self.s.backstop if self.s.strategy.proactive else self.s.strategy

    def _build_milestones(self) -> list[_Milestone]:
        s = self.s
        seq = itertools.count()
        ms: list[_Milestone] = []

        def add(progress_ms: int, kind: str, repeatable: bool = False, **data) -> None:
            ms.append(_Milestone(progress_ms, _RANK[kind], next(seq), kind, data, repeatable))

        ckpts = checkpoint_instants(s.base_duration_s, s.periodicity_s)
        owners = sorted(self.initial_owner)
        self.schedule = build_fault_schedule(s.faults, ckpts, s.base_duration_s, random.Random(f"{s.seed}:faults"),
                                             cores=owners, period_s=s.periodicity_s)
        if self._uses_checkpoints():
            for c in ckpts:
                add(to_ms(c), "checkpoint", True)
        if self.emulating:
            for k in range(1, s.emulation.ticks + 1):
                add(self.base_ms * k // s.emulation.ticks, "tick", True, tick=k)
        predictor_rng = random.Random(f"{s.seed}:predictor")
        for i, (t, core) in enumerate(self.schedule):
            pred = classify_fault(t, core, s.predictor, predictor_rng) if s.strategy.proactive else None
            if pred is not None:
                add(max(0, to_ms(t) - self.lead_ms), "predict", index=i, nominal_ms=to_ms(t), core=core)
            else:
                add(to_ms(t), "fault", index=i, nominal_ms=to_ms(t), core=core)
        if s.strategy.proactive and s.false_predictions:
            hours = s.base_duration_s / 3600
            true_rate = s.predictor.coverage * len(self.schedule) / hours
            for p in emit_false_predictions(s.predictor, s.base_duration_s, random.Random(f"{s.seed}:false"),
                                            true_rate, owners):
                add(to_ms(p.issued_at_s), "false-predict", core=p.core)
        add(self.base_ms, "complete")
        ms.sort()
        return ms

    # ---------------------------------------------------------------- helpers
    def log(self, kind: str, at_ms: int | None = None, **payload) -> None:
        self.trace.events.append(Event(self.now if at_ms is None else at_ms, kind, payload))

    def push(self, at_ms: int, kind: str, **data) -> None:
        heapq.heappush(self.heap, (at_ms, next(self.seq), kind, data))

    def stall(self, duration_ms: int) -> None:
        self.busy_until = max(self.busy_until, self.now) + duration_ms

    def advance(self, to_ms_: int) -> None:
        run_from = max(self.now, self.busy_until)
        if to_ms_ > run_from:
            self.progress += to_ms_ - run_from
        self.now = max(self.now, to_ms_)

    def next_milestone(self) -> _Milestone:
        while self.milestones[self.pointer].fired and not self.milestones[self.pointer].repeatable:
            self.pointer += 1
        return self.milestones[self.pointer]

    def rewind(self, progress_ms: int) -> None:
        self.progress = progress_ms
        i = 0
        while i < len(self.milestones) and (
            self.milestones[i].progress_ms < progress_ms
            or (self.milestones[i].progress_ms == progress_ms and self.milestones[i].repeatable)
        ):
            i += 1
        self.pointer = i

    def check_hosting(self) -> None:
        cores = list(self.host.values())
        if len(set(cores)) != len(cores):
            raise InvariantViolation(f"two sub-jobs share a core: {self.host}")
        for job, core in self.host.items():
            hosted = self.vcores[core].hosted
            expected = self.agents[job].id if job in self.agents else job
            if hosted != expected:
                raise InvariantViolation(f"virtual core {core} hosts {hosted!r}, expected {expected!r}")
            if job in self.agents and self.agents[job].location != core:
                raise InvariantViolation(f"agent for {job} records location {self.agents[job].location}, hosted on {core}")

    def fail(self, reason: str) -> None:
        self.trace.status = "failed"
        self.log("job-failed", reason=reason)

    # ---------------------------------------------------------------- compute
    def tick(self, m: _Milestone) -> None:
        for job in self.graph.topological_order():
            core = self.host[job.id]
            if self.topology[core].status is CoreStatus.FAILED:
                raise InvariantViolation(f"{job.id} computing on failed core {core}")
            self.log("compute", subjob=job.id, core=core, tick=m.data["tick"])
            out = self.programs[job.id].step(self.states[job.id])
            if out is None:
                continue
            if not job.output_deps:
                self.trace.result = out
                continue
            for consumer in job.output_deps:
                self.route(job.id, consumer, out)

    def route(self, source: str, consumer: str, value: Any) -> None:
        if source in self.agents:
            cached = self.agents[source].known_dependencies[consumer]
            if cached != self.host[consumer]:
                raise InvariantViolation(f"{source} addresses {consumer} on core {cached}, hosted on {self.host[consumer]}")
        self.programs[consumer].receive(self.states[consumer], source, value)

    # ---------------------------------------------------------------- checkpoints
    def checkpoint(self) -> None:
        kind = self.recovery_kind
        near = sorted(self.host.values())
        snapshot = copy.deepcopy((self.states, self.trace.result)) if self.emulating else None
        record, _ = checkpoint_create(kind, self.progress / 1000, self.s.checkpoint_servers, self.s.cost_model,
                                      self.s.periodicity_s, topology=self.topology, near=near, snapshot=snapshot)
        self.records = [r for r in self.records if r.at_s != record.at_s] + [record]
        self.log("checkpoint", progress_ms=self.progress, server=record.server, replicas=list(record.replicas))

    def recover_reactively(self, nominal_ms: int, core: int, job: str) -> FaultRecord | None:
        kind = self.recovery_kind
        if kind is None:
            self.fail(f"unpredicted fault on core {core} and no backstop")
            return None
        at_progress = self.progress
        if kind is StrategyKind.COLD_RESTART:
            r = cold_restart_recover(at_progress / 1000, self.s.cost_model)
            lost, reinstate, overhead, restore_ms, snapshot = r.lost_work_s, r.reinstate_s, 0.0, 0, None
        else:
            rb = checkpoint_rollback(at_progress / 1000, self.records, self.s.cost_model, kind, self.s.periodicity_s)
            lost, reinstate = rb.lost_work_s, rb.reinstate_s
            overhead = self.s.cost_model.overhead(kind, self.s.periodicity_s)
            restore_ms = to_ms(rb.record.at_s) if rb.record else 0
            snapshot = rb.record.snapshot if rb.record else None
        if self.emulating:
            saved = snapshot if snapshot is not None else (self.initial_states, None)
            self.states, self.trace.result = copy.deepcopy(saved)
        target = self.free_core()
        if target is None:
            self.fail(f"no free core to restart {job}")
            return None
        self.relocate(job, target)
        self.rewind(restore_ms)
        duration = to_ms(reinstate) + to_ms(overhead)
        self.stall(duration)
        self.log("rollback", subjob=job, to_progress_ms=restore_ms, lost_work_ms=to_ms(lost), strategy=kind.value)
        self.log("reinstated", at_ms=self.busy_until, subjob=job, core=target)
        self.push(self.busy_until, "repair", core=core)
        return FaultRecord(nominal_ms / 1000, self.now / 1000, core, job, False, lost, 0.0, reinstate, overhead,
                           kind.value)

    def free_core(self) -> int | None:
        used = set(self.host.values())
        for c in self.topology.alive():
            if c.status is CoreStatus.ALIVE and c.id not in used:
                return c.id
        return None

    def relocate(self, job: str, target: int) -> None:
        old = self.host[job]
        self.rehost(job, old, target)
        self.log("relocate", subjob=job, from_core=old, to_core=target)

    def rehost(self, job: str, old: int, new: int) -> None:
        entity = self.vcores[old].hosted
        self.vcores[old].hosted = None
        self.vcores[new].hosted = entity
        self.host[job] = new
        if job in self.agents:
            self.agents[job].location = new
            for dep in self.graph[job].dependencies:
                self.agents[dep].known_dependencies[job] = new
            self.agents[job].known_dependencies = {d: self.host[d] for d in self.graph[job].dependencies}
        self.check_hosting()

    # ---------------------------------------------------------------- faults
    def fault(self, m: _Milestone) -> None:
        job = self.initial_owner[m.data["core"]]
        core = self.host[job]
        self.topology[core].status = CoreStatus.FAILED
        self.log("fault", core=core, subjob=job, fault_index=m.data["index"], predicted=False)
        rec = self.recover_reactively(m.data["nominal_ms"], core, job)
        if rec is not None:
            self.trace.faults.append(rec)

    def predict(self, m: _Milestone, outcome: Outcome) -> None:
        job = self.initial_owner[m.data["core"]]
        core = self.host[job]
        prediction = Prediction(core, self.now / 1000, outcome)
        if self.topology[core].status is CoreStatus.ALIVE:
            self.topology[core].status = CoreStatus.PREDICTED_FAIL
        self.log("prediction", core=core, subjob=job, outcome=outcome.value, fault_index=m.data.get("index"))
        if outcome is Outcome.TRUE_PREDICTION:
            self.stall(to_ms(self.s.cost_model.predict_s))
        self.push(self.now + self.lead_ms, "migrate", job=job, prediction=prediction,
                  nominal_ms=m.data.get("nominal_ms"), index=m.data.get("index"))

    def migrate(self, data: dict) -> None:
        job, prediction = data["job"], data["prediction"]
        true = prediction.outcome is Outcome.TRUE_PREDICTION
        source = self.host[job]
        if source != prediction.core:
            # the job moved while the warning was pending; the warning follows it
            stale = self.topology[prediction.core]
            if stale.status is CoreStatus.PREDICTED_FAIL:
                stale.status = CoreStatus.ALIVE
            if self.topology[source].status is CoreStatus.ALIVE:
                self.topology[source].status = CoreStatus.PREDICTED_FAIL
            self.log("retarget", subjob=job, from_core=prediction.core, to_core=source)
            prediction = replace(prediction, core=source)
        try:
            mover, reinstate_ms = self.move(job, prediction)
        except NoViableTargetError as exc:
            self.log("no-viable-target", subjob=job, core=source, reason=str(exc))
            if not true:
                self.topology[source].status = CoreStatus.ALIVE
                return
            self.topology[source].status = CoreStatus.FAILED
            self.log("fault", core=source, subjob=job, fault_index=data["index"], predicted=True)
            rec = self.recover_reactively(data["nominal_ms"], source, job)
            if rec is not None:
                rec.predict_s = self.s.cost_model.predict_s
                self.trace.faults.append(rec)
            return
        overhead = self.s.cost_model.overhead(mover, self.s.periodicity_s)
        self.stall(reinstate_ms + to_ms(overhead))
        if true:
            self.topology[source].status = CoreStatus.FAILED
            self.log("fault", core=source, subjob=None, fault_index=data["index"], predicted=True)
            self.push(self.busy_until, "repair", core=source)
        else:
            self.topology[source].status = CoreStatus.ALIVE
        rec = FaultRecord(
            (data["nominal_ms"] or 0) / 1000, self.now / 1000, source, job, True, 0.0,
            self.s.cost_model.predict_s if true else 0.0, reinstate_ms / 1000, overhead, mover,
        )
        (self.trace.faults if true else self.trace.false_alarms).append(rec)

    def move(self, job: str, prediction: Prediction) -> tuple[str, int]:
        s = self.s
        source = prediction.core
        if s.strategy is StrategyKind.HYBRID:
            deal = negotiate(self.agents[job], self.vcores[source], prediction, self.job_z,
                             s.job.total_data_kb, s.job.effective_process_size_kb, s.tie_break)
            self.log("negotiation", subjob=job, core=source, mover=deal.mover, stood_down=deal.stood_down, z=deal.z)
            mover = deal.mover
        else:
            mover = s.strategy.value
        occupied = set(self.host.values())
        if mover == "agent":
            plan, steps = agent_migrate(self.agents[job], prediction, self.graph, self.topology, occupied, s.latency)
        else:
            plan, steps = core_migrate(self.vcores[source], prediction, self.graph, self.topology, occupied, s.latency)
        nominal = sum(st.duration_ms for st in steps)
        if self.emulating:
            jitter = random.Random(f"{s.seed}:jitter:{self.now}").randint(0, s.emulation.jitter_ms)
            reinstate_ms = nominal + jitter
            scale = 1.0
        else:
            reinstate_ms = to_ms(s.cost_model.reinstate(mover, s.periodicity_s))
            scale = reinstate_ms / nominal if nominal else 0.0
        elapsed = 0
        for st in steps:
            if st.kind == "probe":
                self.log("probe", prober=source, probed=st.detail["core"], alive=st.detail["alive"],
                         predicted_fail=st.detail["predicted_fail"])
                continue
            if st.kind == "probe-gather":
                self.log("probe-gather", core=source)
                self.log("migration", mover=plan.mover, subjob=plan.subjob, from_core=plan.from_core,
                         to_core=plan.to_core, notified=plan.notified)
                continue
            at = self.now + math.floor(elapsed * scale)
            self.log(st.kind, at_ms=at, subjob=job, mover=mover, **{k: v for k, v in st.detail.items()})
            elapsed += st.duration_ms
        self.rehost(job, plan.from_core, plan.to_core)
        if self.emulating:
            self.states[job] = pickle.loads(pickle.dumps(self.states[job]))
        self.log("reinstated", at_ms=self.now + reinstate_ms, subjob=job, core=plan.to_core, mover=mover,
                 reinstate_ms=reinstate_ms)
        return mover, reinstate_ms

    # ---------------------------------------------------------------- loop
    def run(self) -> Trace:
        self.check_hosting()
        self.log("start", strategy=self.s.strategy.value, mode=self.s.mode, subjobs=len(self.graph),
                 cores=len(self.topology), z=self.job_z, placement=dict(sorted(self.host.items())))
        while self.trace.status == "running":
            m = self.next_milestone()
            m_at = max(self.now, self.busy_until) + (m.progress_ms - self.progress)
            if self.heap and self.heap[0][0] <= m_at:
                at, _, kind, data = heapq.heappop(self.heap)
                self.advance(at)
                if kind == "migrate":
                    self.migrate(data)
                elif kind == "repair":
                    if self.topology[data["core"]].status is CoreStatus.FAILED:
                        self.topology[data["core"]].status = CoreStatus.ALIVE
                        self.log("repair", core=data["core"])
                continue
            self.advance(m_at)
            m.fired = True
            self.pointer += 1
            if m.kind == "tick":
                self.tick(m)
            elif m.kind == "checkpoint":
                self.checkpoint()
            elif m.kind == "fault":
                self.fault(m)
            elif m.kind == "predict":
                self.predict(m, Outcome.TRUE_PREDICTION)
            elif m.kind == "false-predict":
                self.predict(m, Outcome.FALSE_PREDICTION)
            else:
                if self.emulating and self.trace.result is None:
                    raise InvariantViolation("job reached its nominal end without a result from the sink")
                self.trace.status = "completed"
                self.trace.total_s = self.now / 1000
                self.log("complete", total_ms=self.now)
        # stable by timestamp; protocol steps are logged ahead of time
        self.trace.events.sort(key=lambda e: e.at_ms)
        return self.trace


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def run_scenario(scenario: Scenario) -> Trace:
    scenario.validate()
    trace = _Run(scenario).run()
    for e in trace.events:
        e.payload = _jsonable(e.payload)
    return trace


def trial_scenarios(scenario: Scenario) -> list[Scenario]:
    return [replace(scenario, seed=scenario.seed + i, trials=1) for i in range(scenario.trials)]


def run_trials(scenario: Scenario, jobs: int = 1) -> tuple[list[Trace], Aggregate]:
    """Run ``scenario.trials`` independent trials; trial i uses seed + i."""
    scenario.validate()
    runs = trial_scenarios(scenario)
    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(run_scenario, runs))
    else:
        traces = [run_scenario(s) for s in runs]
    return traces, aggregate(traces)


def fault_schedule_for(scenario: Scenario) -> FaultSchedule:
    run = _Run(scenario)
    return run.schedule
