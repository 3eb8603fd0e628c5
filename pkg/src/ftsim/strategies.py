"""Fault-tolerance strategies: agent and core migration, hybrid negotiation,
checkpoint/rollback, cold restart, and closed-form execution-time composition."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .costs import CostModel, StrategyKind, to_ms
from .failures import Prediction, ProbeReport, probe
from .model import Agent, CoreStatus, DependencyGraph, Topology, VirtualCore, dependency_count

RULE_Z_LIMIT = 10
RULE_SIZE_LIMIT_KB = 2 ** 24


class NoViableTargetError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProtocolLatency:
    """Per-step latencies of the migration protocols, in milliseconds.

    Defaults are calibrated so that a sub-job carrying 2**19 KB reinstates in
    470 ms by agent and 380 ms by core at Z=4, and in 542 ms by agent at Z=12.
    """

    probe_rtt_ms: int = 20
    spawn_ms: int = 150
    kb_per_ms: int = 2048
    terminate_ms: int = 8
    reestablish_ms: int = 9
    vm_migrate_ms: int = 90
    rebind_ms: int = 14

    def transfer_ms(self, kb: int) -> int:
        return math.ceil(kb / self.kb_per_ms)


@dataclass
class ProtocolStep:
    kind: str
    duration_ms: int
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class MigrationPlan:
    mover: str
    from_core: int
    to_core: int
    subjob: str
    notified: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.to_core == self.from_core:
            raise ValueError("migration target equals source")


@dataclass
class Negotiation:
    mover: str
    stood_down: str
    z: int
    s_d_kb: int
    s_p_kb: int


@dataclass
class CheckpointRecord:
    at_s: float
    server: int
    snapshot: Any
    strategy: StrategyKind
    replicas: tuple[int, ...] = ()


@dataclass
class Rollback:
    lost_work_s: float
    reinstate_s: float
    record: CheckpointRecord | None


@dataclass
class Restart:
    lost_work_s: float
    reinstate_s: float


def _probe_neighbours(source: int, topology: Topology, at_s: float) -> list[ProtocolStep]:
    steps = []
    for n in sorted(topology[source].neighbors):
        report: ProbeReport = probe(topology[source], topology[n], at_s)
        steps.append(ProtocolStep("probe", 0, {"core": n, "alive": report.alive,
                                               "predicted_fail": topology[n].status is CoreStatus.PREDICTED_FAIL}))
    return steps


def _choose_target(source: int, topology: Topology, occupied: set[int]) -> int:
    for n in sorted(topology[source].neighbors):
        if topology[n].status is CoreStatus.ALIVE and n not in occupied:
            return n
    raise NoViableTargetError(f"no viable adjacent core for core {source}")


def agent_migrate(
    agent: Agent,
    prediction: Prediction,
    graph: DependencyGraph,
    topology: Topology,
    occupied: set[int],
    latency: ProtocolLatency = ProtocolLatency(),
) -> tuple[MigrationPlan, list[ProtocolStep]]:
    """Plan an agent's move off a core predicted to fail.

    Steps come out in protocol order: probe every neighbour, spawn on the
    target, transfer the data, notify each dependent, terminate the old
    process, then re-establish each of the Z dependencies one at a time.
    """
    if prediction.core != agent.location:
        raise ValueError(f"prediction for core {prediction.core} does not target agent on {agent.location}")
    job = graph[agent.payload]
    steps = _probe_neighbours(agent.location, topology, prediction.issued_at_s)
    steps.append(ProtocolStep("probe-gather", latency.probe_rtt_ms))
    target = _choose_target(agent.location, topology, occupied)
    steps.append(ProtocolStep("spawn", latency.spawn_ms, {"core": target}))
    steps.append(ProtocolStep("transfer", latency.transfer_ms(job.data_size_kb), {"kb": job.data_size_kb}))
    deps = job.input_deps + job.output_deps
    for dep in deps:
        steps.append(ProtocolStep("notify", 0, {"dependent": dep}))
    steps.append(ProtocolStep("terminate", latency.terminate_ms, {"core": agent.location}))
    for dep in deps:
        steps.append(ProtocolStep("reestablish", latency.reestablish_ms, {"dependent": dep}))
    plan = MigrationPlan("agent", agent.location, target, job.id, list(deps))
    return plan, steps


def core_migrate(
    vcore: VirtualCore,
    prediction: Prediction,
    graph: DependencyGraph,
    topology: Topology,
    occupied: set[int],
    latency: ProtocolLatency = ProtocolLatency(),
) -> tuple[MigrationPlan, list[ProtocolStep]]:
    """Plan a virtual core's push of its sub-job onto an adjacent core; the
    dependencies are re-bound in a single step."""
    if prediction.core != vcore.mapped_core:
        raise ValueError(f"prediction for core {prediction.core} does not target vcore on {vcore.mapped_core}")
    if vcore.hosted is None:
        raise ValueError(f"virtual core {vcore.id} hosts nothing")
    job = graph[vcore.hosted] if vcore.hosted in graph.nodes else graph[vcore.hosted.split(":", 1)[1]]
    steps = _probe_neighbours(vcore.mapped_core, topology, prediction.issued_at_s)
    steps.append(ProtocolStep("probe-gather", latency.probe_rtt_ms))
    target = _choose_target(vcore.mapped_core, topology, occupied)
    steps.append(ProtocolStep("migrate", latency.vm_migrate_ms + latency.transfer_ms(job.data_size_kb),
                              {"core": target, "kb": job.data_size_kb}))
    steps.append(ProtocolStep("rebind", latency.rebind_ms, {"dependencies": dependency_count(job)}))
    plan = MigrationPlan("core", vcore.mapped_core, target, job.id, [])
    return plan, steps


def hybrid_decide(z: int, s_d_kb: int, s_p_kb: int, tie_break: str = "core") -> str:
    """Pick the mover: few dependencies favour the core; otherwise small data or
    small processes favour the agent; otherwise ``tie_break``."""
    if min(z, s_d_kb, s_p_kb) < 0:
        raise ValueError("inputs must be non-negative")
    if z <= RULE_Z_LIMIT:
        return "core"
    if s_d_kb <= RULE_SIZE_LIMIT_KB:
        return "agent"
    if s_p_kb <= RULE_SIZE_LIMIT_KB:
        return "agent"
    if tie_break not in ("agent", "core"):
        raise ValueError(f"tie_break must be 'agent' or 'core', got {tie_break!r}")
    return tie_break


def negotiate(agent: Agent, vcore: VirtualCore, prediction: Prediction,
              z: int, s_d_kb: int, s_p_kb: int, tie_break: str = "core") -> Negotiation:
    if agent.location != vcore.mapped_core:
        raise ValueError("agent is not hosted on this virtual core")
    if prediction.core != vcore.mapped_core:
        raise ValueError("prediction does not concern this virtual core")
    mover = hybrid_decide(z, s_d_kb, s_p_kb, tie_break)
    return Negotiation(mover, "agent" if mover == "core" else "core", z, s_d_kb, s_p_kb)


def checkpoint_create(
    strategy: StrategyKind,
    at_s: float,
    servers: Sequence[int],
    cost_model: CostModel,
    periodicity_s: int,
    *,
    topology: Topology | None = None,
    near: Iterable[int] = (),
    snapshot: Any = None,
) -> tuple[CheckpointRecord, float]:
    """Store a checkpoint and return it with its overhead charge.

    Central-single writes to the first server, central-multi replicates to
    every server, decentralised writes to the server fewest hops from the
    cores in ``near`` (ties to the lowest id).
    """
    strategy = StrategyKind(strategy)
    if not strategy.checkpointing:
        raise ValueError(f"{strategy.value} does not checkpoint")
    if not servers:
        raise ValueError("no checkpoint servers configured")
    servers = list(servers)
    replicas: tuple[int, ...] = ()
    if strategy is StrategyKind.CKPT_CENTRAL_SINGLE:
        server = servers[0]
    elif strategy is StrategyKind.CKPT_CENTRAL_MULTI:
        server, replicas = servers[0], tuple(servers)
    else:
        near = list(near)
        if topology is None or not near:
            server = min(servers)
        else:
            server = min(servers, key=lambda s: (min(topology.hops(c, s) for c in near), s))
    record = CheckpointRecord(at_s, server, snapshot, strategy, replicas)
    return record, cost_model.overhead(strategy, periodicity_s)


def checkpoint_rollback(fault_s: float, records: Sequence[CheckpointRecord], cost_model: CostModel,
                        strategy: StrategyKind, periodicity_s: int) -> Rollback:
    eligible = [r for r in records if r.at_s <= fault_s]
    latest = max(eligible, key=lambda r: r.at_s) if eligible else None
    lost = fault_s - (latest.at_s if latest else 0.0)
    return Rollback(lost, cost_model.reinstate(strategy, periodicity_s), latest)


def cold_restart_recover(fault_s: float, cost_model: CostModel) -> Restart:
    return Restart(fault_s, cost_model.cold_restart_reinstate_s)


def checkpoint_instants(base_s: float, periodicity_s: float) -> list[float]:
    out, k = [], 1
    while k * periodicity_s < base_s:
        out.append(float(k * periodicity_s))
        k += 1
    return out


@dataclass
class FaultCharge:
    time_s: float
    predicted: bool
    lost_work_s: float = 0.0
    predict_s: float = 0.0
    reinstate_s: float = 0.0
    overhead_s: float = 0.0

    @property
    def total_s(self) -> float:
        return self.lost_work_s + self.predict_s + self.reinstate_s + self.overhead_s


@dataclass
class Composition:
    total_s: float | None
    charges: list[FaultCharge]
    failed: bool = False


def compose_execution_time(
    base_s: float,
    faults: Iterable[float] | Iterable[tuple[float, int]],
    strategy: StrategyKind,
    cost_model: CostModel,
    periodicity_s: int,
    *,
    predicted: Sequence[bool] | None = None,
    backstop: StrategyKind | None = None,
    mover: str | None = None,
    false_predictions: int = 0,
) -> Composition:
    """Closed-form total execution time.

    Reactive strategies pay lost work, reinstate and overhead per fault;
    predicted faults under proactive strategies pay prediction, reinstate and
    overhead and lose nothing. Faults stay on their nominal instants.
    """
    strategy = StrategyKind(strategy)
    times = [f[0] if isinstance(f, tuple) else f for f in faults]
    if predicted is None:
        predicted = [True] * len(times)
    ckpts = checkpoint_instants(base_s, periodicity_s)
    total_ms = to_ms(base_s)
    charges: list[FaultCharge] = []

    def reactive(t: float, kind: StrategyKind) -> FaultCharge:
        if kind is StrategyKind.COLD_RESTART:
            r = cold_restart_recover(t, cost_model)
            return FaultCharge(t, False, r.lost_work_s, 0.0, r.reinstate_s, 0.0)
        i = bisect.bisect_right(ckpts, t)
        last = ckpts[i - 1] if i else 0.0
        return FaultCharge(t, False, t - last, 0.0, cost_model.reinstate(kind, periodicity_s),
                           cost_model.overhead(kind, periodicity_s))

    if strategy.proactive:
        kind = mover if strategy is StrategyKind.HYBRID else strategy.value
        if kind not in ("agent", "core"):
            raise ValueError("hybrid composition needs mover='agent' or 'core'")
        for t, hit in zip(times, predicted):
            if hit:
                charge = FaultCharge(t, True, 0.0, cost_model.predict_s, cost_model.reinstate(kind, periodicity_s),
                                     cost_model.overhead(kind, periodicity_s))
            elif backstop is not None:
                charge = reactive(t, StrategyKind(backstop))
            else:
                charges.append(FaultCharge(t, False))
                return Composition(None, charges, failed=True)
            charges.append(charge)
        wasted = to_ms(cost_model.reinstate(kind, periodicity_s)) + to_ms(cost_model.overhead(kind, periodicity_s))
        total_ms += false_predictions * wasted
    else:
        charges = [reactive(t, strategy) for t in times]

    for c in charges:
        total_ms += to_ms(c.lost_work_s) + to_ms(c.predict_s) + to_ms(c.reinstate_s) + to_ms(c.overhead_s)
    return Composition(total_ms / 1000, charges)
