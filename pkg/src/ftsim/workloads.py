"""Computations carried by sub-jobs: parallel summation and genome pattern search.

The module also provides the emulation programs the simulator steps through
when ``mode == "emulation"``. Program state is a plain dict so it can be
pickled across a migration or deep-copied into a checkpoint.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple

import numpy as np

from .model import DependencyGraph, OpKind

BASES = "ACGT"
CHROMOSOMES = ("chrI", "chrII", "chrIII", "chrIV", "chrV", "chrX", "chrM")
_COMPLEMENT = str.maketrans("ACGT", "TGCA")


class FastaError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownSymbolError(FastaError):
    pass


def reverse_complement(seq: str) -> str:
    return seq.translate(_COMPLEMENT)[::-1]


@dataclass
class PatternDictionary:
    entries: list[tuple[int, str]]
    length_range: tuple[int, int] = (15, 25)

    def __post_init__(self) -> None:
        lo, hi = self.length_range
        for idx, (pid, seq) in enumerate(self.entries):
            if pid != idx:
                raise ValueError(f"pattern ids must be dense from 0; entry {idx} has id {pid}")
            if not lo <= len(seq) <= hi:
                raise ValueError(f"pattern {pid} has length {len(seq)}, outside [{lo}, {hi}]")
            if set(seq) - set(BASES):
                raise ValueError(f"pattern {pid} contains symbols outside ACGT")

    @classmethod
    def from_sequences(cls, seqs: Iterable[str], length_range: tuple[int, int] = (15, 25)) -> "PatternDictionary":
        return cls(list(enumerate(seqs)), length_range)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SequenceStore:
    chromosomes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, seq in self.chromosomes.items():
            if not seq:
                raise ValueError(f"chromosome {name} is empty")

    @property
    def total_length(self) -> int:
        return sum(len(s) for s in self.chromosomes.values())


class HitRecord(NamedTuple):
    chromosome: str
    start: int
    end: int
    strand: str
    pattern_id: int

    def to_tsv(self) -> str:
        return f"{self.chromosome}\t{self.start}\t{self.end}\t{self.strand}\t{self.pattern_id}"

    @classmethod
    def from_tsv(cls, line: str) -> "HitRecord":
        chrom, start, end, strand, pid = line.rstrip("\n").split("\t")
        return cls(chrom, int(start), int(end), strand, int(pid))


def hit_key(hit: HitRecord) -> tuple:
    return (hit.chromosome, hit.start, hit.pattern_id, hit.strand)


def synthesize_sequence(seed: int, length: int) -> str:
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    codes = np.random.default_rng(seed).integers(0, 4, size=length, dtype=np.uint8)
    return np.frombuffer(b"ACGT", dtype=np.uint8)[codes].tobytes().decode("ascii")


def synthetic_store(seed: int, total_length: int, names: Iterable[str] = CHROMOSOMES) -> SequenceStore:
    """Split ``total_length`` bases across the named chromosomes, one seeded draw each."""
    names = list(names)
    base = total_length // len(names)
    lengths = [base] * len(names)
    lengths[-1] += total_length - base * len(names)
    return SequenceStore({n: synthesize_sequence(seed * 1000 + i, ln) for i, (n, ln) in enumerate(zip(names, lengths))})


def random_dictionary(
    seed: int,
    n_patterns: int,
    store: SequenceStore | None = None,
    planted_fraction: float = 0.5,
    length_range: tuple[int, int] = (15, 25),
) -> PatternDictionary:
    """Random patterns; a fraction is cut from ``store`` (half of those reverse
    complemented) so that searches have hits on both strands."""
    rng = random.Random(seed)
    names = sorted(store.chromosomes) if store else []
    seqs = []
    for _ in range(n_patterns):
        length = rng.randint(*length_range)
        if names and rng.random() < planted_fraction:
            chrom = store.chromosomes[rng.choice(names)]
            if len(chrom) >= length:
                start = rng.randrange(len(chrom) - length + 1)
                cut = chrom[start:start + length]
                seqs.append(reverse_complement(cut) if rng.random() < 0.5 else cut)
                continue
        seqs.append("".join(rng.choice(BASES) for _ in range(length)))
    return PatternDictionary.from_sequences(seqs, length_range)


def search_range(name: str, seq: str, patterns: PatternDictionary, start: int, stop: int) -> list[HitRecord]:
    """Hits on one chromosome whose 0-based start offset lies in [start, stop)."""
    hits = []
    for pid, pat in patterns.entries:
        width = len(pat)
        limit = min(len(seq), stop + width - 1)
        for strand, probe in (("+", pat), ("-", reverse_complement(pat))):
            i = seq.find(probe, start, limit)
            while i != -1:
                hits.append(HitRecord(name, i + 1, i + width, strand, pid))
                i = seq.find(probe, i + 1, limit)
    hits.sort(key=hit_key)
    return hits


def genome_search(store: SequenceStore, patterns: PatternDictionary) -> list[HitRecord]:
    hits = []
    for name, seq in store.chromosomes.items():
        hits.extend(search_range(name, seq, patterns, 0, len(seq)))
    hits.sort(key=hit_key)
    return hits


def combine_hits(partials: Iterable[list[HitRecord]]) -> list[HitRecord]:
    return list(heapq.merge(*partials, key=hit_key))


def format_hits(hits: Iterable[HitRecord]) -> str:
    return "".join(h.to_tsv() + "\n" for h in hits)


def shard_store(store: SequenceStore, n_shards: int) -> list[list[tuple[str, int, int]]]:
    """Partition all start offsets of the store into ``n_shards`` contiguous runs of
    (chromosome, start, stop) segments of near-equal size."""
    if n_shards < 1:
        raise ValueError("need at least one shard")
    flat = [(name, len(store.chromosomes[name])) for name in sorted(store.chromosomes)]
    total = sum(n for _, n in flat)
    bounds = [total * k // n_shards for k in range(n_shards + 1)]
    shards: list[list[tuple[str, int, int]]] = []
    for k in range(n_shards):
        lo, hi = bounds[k], bounds[k + 1]
        segs, offset = [], 0
        for name, n in flat:
            a, b = max(lo, offset), min(hi, offset + n)
            if a < b:
                segs.append((name, a - offset, b - offset))
            offset += n
        shards.append(segs)
    return shards


def evaluate_reduction(graph: DependencyGraph, leaf_inputs: Mapping[str, int]) -> int:
    """Push leaf values through the tree with integer addition and return the
    value delivered by the sink."""
    missing = [j.id for j in graph.leaves() if j.id not in leaf_inputs]
    if missing:
        raise ValueError(f"missing leaf inputs for {missing}")
    inbox: dict[str, list[int]] = {j.id: [] for j in graph}
    result = None
    for job in graph.topological_order():
        value = leaf_inputs[job.id] if not job.input_deps else sum(inbox[job.id])
        if not job.output_deps:
            result = value
        for dst in job.output_deps:
            inbox[dst].append(value)
    return result


def load_fasta(path: str | Path) -> SequenceStore:
    chromosomes: dict[str, list[str]] = {}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                current = line[1:].split()[0] if line[1:].strip() else ""
                if not current:
                    raise FastaError("record header without a name", lineno)
                if current in chromosomes:
                    raise FastaError(f"duplicate record {current!r}", lineno)
                chromosomes[current] = []
                continue
            if current is None:
                raise FastaError("sequence data before the first header", lineno)
            line = line.upper()
            bad = set(line) - set(BASES)
            if bad:
                raise UnknownSymbolError(f"unknown symbol(s) {''.join(sorted(bad))!r} in {current}", lineno)
            chromosomes[current].append(line)
    store = {}
    for name, parts in chromosomes.items():
        if not parts:
            raise FastaError(f"record {name!r} has no sequence")
        store[name] = "".join(parts)
    return SequenceStore(store)


def dump_fasta(store: SequenceStore, path: str | Path, width: int = 60) -> None:
    with open(path, "w") as fh:
        for name, seq in store.chromosomes.items():
            fh.write(f">{name}\n")
            for i in range(0, len(seq), width):
                fh.write(seq[i:i + width] + "\n")


# --- emulation programs -----------------------------------------------------

class Program:
    """Work executed by one sub-job, advanced once per compute tick.

    ``step`` returns the sub-job's output the first time it completes and
    ``None`` otherwise. ``receive`` delivers an upstream output.
    """

    def initial_state(self) -> dict:
        raise NotImplementedError

    def step(self, state: dict) -> Any:
        raise NotImplementedError

    def receive(self, state: dict, source: str, value: Any) -> None:
        raise RuntimeError(f"{type(self).__name__} takes no inputs")


class LeafSum(Program):
    def __init__(self, items: list[int], ticks: int):
        self.items = list(items)
        self.chunk = max(1, math.ceil(len(self.items) / ticks))

    def initial_state(self) -> dict:
        # the data travels with the sub-job
        return {"items": list(self.items), "pos": 0, "acc": 0, "done": False}

    def step(self, state: dict) -> Any:
        if state["done"]:
            return None
        end = min(len(state["items"]), state["pos"] + self.chunk)
        state["acc"] += sum(state["items"][state["pos"]:end])
        state["pos"] = end
        if end == len(state["items"]):
            state["done"] = True
            return state["acc"]
        return None


class GatherProgram(Program):
    def __init__(self, expected: list[str]):
        self.expected = list(expected)

    def initial_state(self) -> dict:
        return {"received": {}, "done": False}

    def receive(self, state: dict, source: str, value: Any) -> None:
        if source not in self.expected:
            raise ValueError(f"unexpected input from {source}")
        if source in state["received"]:
            raise ValueError(f"duplicate input from {source}")
        state["received"][source] = value

    def ready(self, state: dict) -> bool:
        return not state["done"] and len(state["received"]) == len(self.expected)


class InteriorSum(GatherProgram):
    def initial_state(self) -> dict:
        return {"received": {}, "acc": 0, "done": False}

    def receive(self, state: dict, source: str, value: Any) -> None:
        super().receive(state, source, value)
        state["acc"] += value

    def step(self, state: dict) -> Any:
        if not self.ready(state):
            return None
        state["done"] = True
        return state["acc"]


class Combiner(GatherProgram):
    def step(self, state: dict) -> Any:
        if not self.ready(state):
            return None
        state["done"] = True
        return combine_hits(state["received"][k] for k in self.expected)


class Searcher(Program):
    """Scans its shard of the (shared, read-only) store ``replication`` times;
    only the first pass records hits, later passes repeat the work."""

    def __init__(self, store: SequenceStore, patterns: PatternDictionary,
                 segments: list[tuple[str, int, int]], ticks: int, replication: int = 1):
        self.store = store
        self.patterns = patterns
        self.segments = list(segments)
        self.replication = replication
        work = sum(b - a for _, a, b in self.segments) * replication
        self.budget = max(1, math.ceil(work / ticks))

    def initial_state(self) -> dict:
        start = self.segments[0][1] if self.segments else 0
        return {"seg": 0, "pos": start, "pass": 0, "hits": [], "done": False}

    def step(self, state: dict) -> Any:
        if state["done"]:
            return None
        if not self.segments:
            state["done"] = True
            return []
        budget = self.budget
        while budget > 0 and not state["done"]:
            name, a, b = self.segments[state["seg"]]
            stop = min(b, state["pos"] + budget)
            found = search_range(name, self.store.chromosomes[name], self.patterns, state["pos"], stop)
            if state["pass"] == 0:
                state["hits"].extend(found)
            budget -= stop - state["pos"]
            state["pos"] = stop
            if stop == b:
                state["seg"] += 1
                if state["seg"] == len(self.segments):
                    state["pass"] += 1
                    state["seg"] = 0
                    if state["pass"] == self.replication:
                        state["done"] = True
                        break
                state["pos"] = self.segments[state["seg"]][1]
        if state["done"]:
            state["hits"].sort(key=hit_key)
            return list(state["hits"])
        return None


def build_programs(
    graph: DependencyGraph,
    ticks: int,
    *,
    store: SequenceStore | None = None,
    patterns: PatternDictionary | None = None,
    leaf_items: Mapping[str, list[int]] | None = None,
    replication: int = 1,
) -> dict[str, Program]:
    programs: dict[str, Program] = {}
    searchers = [j.id for j in graph if j.op is OpKind.SEARCH]
    shards = dict(zip(searchers, shard_store(store, len(searchers)))) if searchers else {}
    for job in graph:
        if job.op is OpKind.LEAF_REDUCE:
            programs[job.id] = LeafSum(leaf_items[job.id], ticks)
        elif job.op is OpKind.INTERIOR_REDUCE:
            programs[job.id] = InteriorSum(job.input_deps)
        elif job.op is OpKind.SEARCH:
            programs[job.id] = Searcher(store, patterns, shards[job.id], ticks, replication)
        else:
            programs[job.id] = Combiner(job.input_deps)
    return programs
