"""Domain types for jobs, sub-jobs, agents and cores, plus job decomposition and placement."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable


class WorkloadKind(str, enum.Enum):
    REDUCTION_SUM = "reduction-sum"
    GENOME_SEARCH = "genome-search"


class OpKind(str, enum.Enum):
    LEAF_REDUCE = "leaf-reduce"
    INTERIOR_REDUCE = "interior-reduce"
    SEARCH = "search"
    COMBINE = "combine"


class CoreStatus(str, enum.Enum):
    ALIVE = "alive"
    PREDICTED_FAIL = "predicted-fail"
    FAILED = "failed"


class InsufficientCoresError(ValueError):
    pass


@dataclass
class JobSpec:
    """A job to be decomposed into sub-jobs.

    ``fan_widths`` holds the number of leaves feeding each second-level node
    of the summation tree. For the genome workload the widths are summed into
    a single pool of search nodes feeding one combine node.
    """

    kind: WorkloadKind
    total_data_kb: int
    fan_widths: list[int]
    patterns: str | None = None
    process_size_kb: int | None = None

    def __post_init__(self) -> None:
        self.kind = WorkloadKind(self.kind)
        if self.total_data_kb <= 0:
            raise ValueError(f"total_data_kb must be positive, got {self.total_data_kb}")
        if not self.fan_widths:
            raise ValueError("fan_widths must be non-empty")
        if any(w < 1 for w in self.fan_widths):
            raise ValueError(f"fan widths must all be >= 1, got {self.fan_widths}")
        if self.process_size_kb is not None and self.process_size_kb <= 0:
            raise ValueError("process_size_kb must be positive when given")

    @property
    def effective_process_size_kb(self) -> int:
        return self.process_size_kb if self.process_size_kb is not None else self.total_data_kb


@dataclass
class SubJob:
    id: str
    op: OpKind
    data_size_kb: int
    process_size_kb: int
    input_deps: list[str] = field(default_factory=list)
    output_deps: list[str] = field(default_factory=list)
    state: Any = None

    def __post_init__(self) -> None:
        if self.data_size_kb < 0 or self.process_size_kb < 0:
            raise ValueError(f"{self.id}: sizes must be non-negative")
        for deps in (self.input_deps, self.output_deps):
            if len(set(deps)) != len(deps):
                raise ValueError(f"{self.id}: duplicate dependency in {deps}")
            if self.id in deps:
                raise ValueError(f"{self.id}: sub-job depends on itself")

    @property
    def dependencies(self) -> list[str]:
        return self.input_deps + self.output_deps


def dependency_count(job: SubJob) -> int:
    """Z = d_i + d_o."""
    return len(job.input_deps) + len(job.output_deps)


@dataclass
class DependencyGraph:
    nodes: dict[str, SubJob]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(src, j.id) for j in self.nodes.values() for src in j.input_deps]

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def __getitem__(self, key: str) -> SubJob:
        return self.nodes[key]

    def leaves(self) -> list[SubJob]:
        return [j for j in self.nodes.values() if not j.input_deps]

    def sinks(self) -> list[SubJob]:
        return [j for j in self.nodes.values() if not j.output_deps]

    def topological_order(self) -> list[SubJob]:
        indegree = {k: len(j.input_deps) for k, j in self.nodes.items()}
        ready = deque(k for k in self.nodes if indegree[k] == 0)
        order = []
        while ready:
            key = ready.popleft()
            order.append(self.nodes[key])
            for nxt in self.nodes[key].output_deps:
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(self.nodes):
            raise ValueError("dependency graph contains a cycle")
        return order

    def validate(self) -> None:
        for job in self.nodes.values():
            for src in job.input_deps:
                if src not in self.nodes or job.id not in self.nodes[src].output_deps:
                    raise ValueError(f"edge {src}->{job.id} is not mirrored in output_deps")
            for dst in job.output_deps:
                if dst not in self.nodes or job.id not in self.nodes[dst].input_deps:
                    raise ValueError(f"edge {job.id}->{dst} is not mirrored in input_deps")
        self.topological_order()

    def scenario_dependency_count(self) -> int:
        """Job-level Z: the largest per-node Z, counting the delivery of the final
        result to the collator as one output of each sink."""
        return max(dependency_count(j) + (0 if j.output_deps else 1) for j in self.nodes.values())


def _split_evenly(total: int, parts: int) -> list[int]:
    base = total // parts
    sizes = [base] * parts
    sizes[-1] += total - base * parts
    return sizes


def decompose_job(spec: JobSpec) -> DependencyGraph:
    """Build the reduction tree (leaves -> one node per input group -> root) or,
    for genome search, a flat pool of search nodes feeding one combine node."""
    n_leaves = sum(spec.fan_widths)
    if n_leaves == 0:
        raise ValueError("fan_widths sum to zero; nothing to decompose")
    leaf_sizes = _split_evenly(spec.total_data_kb, n_leaves)
    ratio = spec.effective_process_size_kb / spec.total_data_kb
    nodes: dict[str, SubJob] = {}

    def add(job_id: str, op: OpKind, size: int, inputs: list[str]) -> None:
        nodes[job_id] = SubJob(job_id, op, size, int(round(size * ratio)), list(inputs))
        for src in inputs:
            nodes[src].output_deps.append(job_id)

    if spec.kind is WorkloadKind.GENOME_SEARCH:
        searchers = [f"search-{i}" for i in range(n_leaves)]
        for sid, size in zip(searchers, leaf_sizes):
            add(sid, OpKind.SEARCH, size, [])
        add("combine", OpKind.COMBINE, spec.total_data_kb, searchers)
        return DependencyGraph(nodes)

    sizes = iter(leaf_sizes)
    groups: list[list[str]] = []
    for g, width in enumerate(spec.fan_widths):
        ids = [f"leaf-{g}-{i}" for i in range(width)]
        for lid in ids:
            add(lid, OpKind.LEAF_REDUCE, next(sizes), [])
        groups.append(ids)
    level2 = []
    for g, ids in enumerate(groups):
        if not ids:
            continue
        add(f"node-{g}", OpKind.INTERIOR_REDUCE, sum(nodes[i].data_size_kb for i in ids), ids)
        level2.append(f"node-{g}")
    add("root", OpKind.INTERIOR_REDUCE, spec.total_data_kb, level2)
    return DependencyGraph(nodes)


@dataclass
class ComputeCore:
    id: int
    neighbors: list[int] = field(default_factory=list)
    status: CoreStatus = CoreStatus.ALIVE


class Topology:
    """A set of compute cores with a symmetric adjacency relation."""

    def __init__(self, cores: Iterable[ComputeCore]):
        self.cores: dict[int, ComputeCore] = {c.id: c for c in cores}
        for core in self.cores.values():
            for n in core.neighbors:
                if core.id not in self.cores[n].neighbors:
                    raise ValueError(f"adjacency {core.id}->{n} is not symmetric")

    @classmethod
    def complete(cls, n: int) -> "Topology":
        return cls(ComputeCore(i, [j for j in range(n) if j != i]) for i in range(n))

    @classmethod
    def ring(cls, n: int) -> "Topology":
        if n < 3:
            return cls.complete(n)
        return cls(ComputeCore(i, sorted({(i - 1) % n, (i + 1) % n})) for i in range(n))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "Topology":
        def nbrs(r: int, c: int) -> list[int]:
            out = []
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    out.append(rr * cols + cc)
            return sorted(out)

        return cls(ComputeCore(r * cols + c, nbrs(r, c)) for r in range(rows) for c in range(cols))

    def __len__(self) -> int:
        return len(self.cores)

    def __getitem__(self, core_id: int) -> ComputeCore:
        return self.cores[core_id]

    def alive(self) -> list[ComputeCore]:
        return [c for c in sorted(self.cores.values(), key=lambda c: c.id) if c.status is not CoreStatus.FAILED]

    def hops(self, src: int, dst: int) -> int:
        if src == dst:
            return 0
        seen = {src}
        frontier = deque([(src, 0)])
        while frontier:
            cur, d = frontier.popleft()
            for n in self.cores[cur].neighbors:
                if n == dst:
                    return d + 1
                if n not in seen:
                    seen.add(n)
                    frontier.append((n, d + 1))
        raise ValueError(f"core {dst} unreachable from {src}")


def adjacent_alive(core: ComputeCore, topology: Topology) -> list[ComputeCore]:
    if core.id not in topology.cores:
        raise KeyError(f"core {core.id} not in topology")
    return [
        topology[n]
        for n in sorted(topology[core.id].neighbors)
        if topology[n].status is not CoreStatus.FAILED
    ]


@dataclass
class VirtualCore:
    id: int
    mapped_core: int
    hosted: str | None = None


@dataclass
class Agent:
    id: str
    payload: str
    location: int
    known_dependencies: dict[str, int] = field(default_factory=dict)


def _ordered_hosts(candidates: list[int], needed: int) -> list[int]:
    if len(candidates) < needed:
        raise InsufficientCoresError(f"{needed} sub-jobs but only {len(candidates)} usable cores")
    return candidates[:needed]


def place_on_agents(graph: DependencyGraph, cores: list[ComputeCore]) -> list[Agent]:
    """Wrap each sub-job in an agent and place sub-job i on the i-th alive core."""
    usable = sorted(c.id for c in cores if c.status is not CoreStatus.FAILED)
    hosts = _ordered_hosts(usable, len(graph))
    location = {job.id: core for job, core in zip(graph, hosts)}
    return [
        Agent(
            id=f"agent:{job.id}",
            payload=job.id,
            location=location[job.id],
            known_dependencies={d: location[d] for d in job.dependencies},
        )
        for job in graph
    ]


def place_on_vcores(
    graph: DependencyGraph,
    vcores: list[VirtualCore],
    topology: Topology | None = None,
) -> dict[str, int]:
    """Allocate sub-job i to the i-th usable virtual core; returns sub-job id -> vcore id.

    Virtual cores whose mapped hardware core is failed are skipped when a
    topology is supplied.
    """
    usable = [
        v for v in sorted(vcores, key=lambda v: v.id)
        if v.hosted is None and (topology is None or topology[v.mapped_core].status is not CoreStatus.FAILED)
    ]
    chosen = _ordered_hosts([v.id for v in usable], len(graph))
    by_id = {v.id: v for v in vcores}
    placement = {}
    for job, vid in zip(graph, chosen):
        by_id[vid].hosted = job.id
        placement[job.id] = vid
    return placement
