import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftsim.model import JobSpec, decompose_job
from ftsim.workloads import (
    FastaError,
    HitRecord,
    PatternDictionary,
    SequenceStore,
    UnknownSymbolError,
    build_programs,
    combine_hits,
    dump_fasta,
    evaluate_reduction,
    format_hits,
    genome_search,
    load_fasta,
    random_dictionary,
    reverse_complement,
    shard_store,
    synthesize_sequence,
    synthetic_store,
)

COMP = {"A": "T", "C": "G", "G": "C", "T": "A"}


def naive_hits(store, patterns):
    """Nested-loop scan of every offset, both strands."""
    out = []
    for name, seq in store.chromosomes.items():
        for pid, pat in patterns.entries:
            rc = "".join(COMP[c] for c in reversed(pat))
            m = len(pat)
            for i in range(len(seq) - m + 1):
                window = seq[i:i + m]
                if all(window[k] == pat[k] for k in range(m)):
                    out.append((name, i + 1, i + m, "+", pid))
                if all(window[k] == rc[k] for k in range(m)):
                    out.append((name, i + 1, i + m, "-", pid))
    return sorted(out, key=lambda h: (h[0], h[1], h[4], h[3]))


def short(seqs):
    return PatternDictionary.from_sequences(seqs, (1, 30))


def test_synthesize_is_deterministic():
    assert synthesize_sequence(1, 10) == synthesize_sequence(1, 10)


def test_seeds_differ():
    a, b = synthesize_sequence(1, 10 ** 6), synthesize_sequence(2, 10 ** 6)
    assert sum(x != y for x, y in zip(a, b)) > 0


def test_base_frequencies():
    seq = synthesize_sequence(7, 10 ** 6)
    for base in "ACGT":
        assert 0.24 <= seq.count(base) / len(seq) <= 0.26


def test_zero_length_rejected():
    with pytest.raises(ValueError):
        synthesize_sequence(1, 0)


def test_forward_hit():
    store = SequenceStore({"chrM": "AAACGTAAA"})
    assert genome_search(store, short(["ACGTA"])) == [HitRecord("chrM", 3, 7, "+", 0)]


def test_reverse_hit():
    store = SequenceStore({"chrM": "AAACGTAAA"})
    assert genome_search(store, short(["TACGT"])) == [HitRecord("chrM", 3, 7, "-", 0)]


def test_absent_pattern():
    store = SequenceStore({"chrM": "AAAAAAAAA"})
    assert genome_search(store, short(["CCC"])) == []


def test_overlapping_occurrences_reported():
    store = SequenceStore({"chrI": "AAAAA"})
    hits = genome_search(store, short(["AAA"]))
    assert [h.start for h in hits if h.strand == "+"] == [1, 2, 3]


def test_pattern_dictionary_contract():
    with pytest.raises(ValueError):
        PatternDictionary([(0, "A" * 14)])
    with pytest.raises(ValueError):
        PatternDictionary([(1, "A" * 15)])
    assert len(PatternDictionary([(0, "A" * 15), (1, "C" * 25)])) == 2


dna = st.text(alphabet="ACGT", min_size=1, max_size=400)


@settings(max_examples=80, deadline=None)
@given(st.lists(dna, min_size=1, max_size=3), st.lists(st.text(alphabet="ACGT", min_size=2, max_size=5), min_size=1,
                                                        max_size=6))
def test_search_matches_naive_scan(chroms, pats):
    store = SequenceStore({f"chr{i}": s for i, s in enumerate(chroms)})
    patterns = short(pats)
    got = [tuple(h) for h in genome_search(store, patterns)]
    assert got == naive_hits(store, patterns)


def test_search_matches_naive_scan_at_scale():
    store = synthetic_store(3, 10 ** 4)
    patterns = random_dictionary(3, 50, store, planted_fraction=0.6)
    got = [tuple(h) for h in genome_search(store, patterns)]
    assert got == naive_hits(store, patterns)
    assert {h[3] for h in got} == {"+", "-"}


@settings(max_examples=50, deadline=None)
@given(dna, st.text(alphabet="ACGT", min_size=2, max_size=6))
def test_reverse_strand_symmetry(seq, pat):
    store = SequenceStore({"chrI": seq})
    minus = [(h.start, h.end) for h in genome_search(store, short([pat])) if h.strand == "-"]
    plus = [(h.start, h.end) for h in genome_search(store, short([reverse_complement(pat)])) if h.strand == "+"]
    assert minus == plus


def test_combine_examples():
    a, b = HitRecord("chrI", 5, 9, "+", 0), HitRecord("chrI", 2, 6, "-", 1)
    assert combine_hits([[a], [b]]) == [b, a]
    assert combine_hits([[], []]) == []


@pytest.mark.parametrize("n", [1, 2, 3, 7, 11])
def test_sharded_search_equals_unsharded(n):
    store = synthetic_store(5, 20_000)
    patterns = random_dictionary(5, 30, store)
    from ftsim.workloads import search_range

    partials = []
    for shard in shard_store(store, n):
        hits = []
        for name, a, b in shard:
            hits.extend(search_range(name, store.chromosomes[name], patterns, a, b))
        partials.append(sorted(hits, key=lambda h: (h.chromosome, h.start, h.pattern_id, h.strand)))
    assert combine_hits(partials) == genome_search(store, patterns)


def test_shards_cover_every_offset_once():
    store = synthetic_store(1, 1001)
    covered = []
    for shard in shard_store(store, 4):
        for name, a, b in shard:
            covered.extend((name, i) for i in range(a, b))
    assert len(covered) == len(set(covered)) == 1001


def test_reduction_examples():
    g = decompose_job(JobSpec("reduction-sum", 4, [4]))
    inputs = dict(zip([j.id for j in g.leaves()], [1, 2, 3, 4]))
    assert evaluate_reduction(g, inputs) == 10
    g1 = decompose_job(JobSpec("reduction-sum", 4, [1]))
    assert evaluate_reduction(g1, {"leaf-0-0": 7}) == 7


def test_missing_leaf_rejected():
    g = decompose_job(JobSpec("reduction-sum", 4, [2]))
    with pytest.raises(ValueError, match="missing"):
        evaluate_reduction(g, {"leaf-0-0": 1})


def test_sixty_four_leaves_equals_fold():
    rng = random.Random(11)
    g = decompose_job(JobSpec("reduction-sum", 64, [16, 16, 16, 16]))
    inputs = {j.id: rng.randrange(-10 ** 9, 10 ** 9) for j in g.leaves()}
    acc = 0
    for v in inputs.values():
        acc = acc + v
    assert evaluate_reduction(g, inputs) == acc


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-10 ** 12, 10 ** 12), min_size=1, max_size=40), st.data())
def test_reduction_placement_invariant(values, data):
    # any grouping of the same leaves gives the same root
    cuts = sorted(data.draw(st.sets(st.integers(1, len(values) - 1), max_size=5)) if len(values) > 1 else [])
    bounds = [0, *cuts, len(values)]
    w = [b - a for a, b in zip(bounds, bounds[1:])]
    g = decompose_job(JobSpec("reduction-sum", 10, w))
    inputs = dict(zip([j.id for j in g.leaves()], values))
    assert evaluate_reduction(g, inputs) == sum(values)


def test_fasta_two_records(tmp_path):
    p = tmp_path / "x.fa"
    p.write_text(">chrI desc\nacgt\nAC\n>chrM\nTTTT\n")
    store = load_fasta(p)
    assert store.chromosomes == {"chrI": "ACGTAC", "chrM": "TTTT"}


def test_fasta_unknown_symbol(tmp_path):
    p = tmp_path / "x.fa"
    p.write_text(">chrI\nACGT\nACNT\n")
    with pytest.raises(UnknownSymbolError) as exc:
        load_fasta(p)
    assert exc.value.line == 3


def test_fasta_parse_error_line(tmp_path):
    p = tmp_path / "x.fa"
    p.write_text("ACGT\n")
    with pytest.raises(FastaError) as exc:
        load_fasta(p)
    assert exc.value.line == 1


def test_fasta_round_trip(tmp_path):
    store = synthetic_store(9, 5000)
    p = tmp_path / "s.fa"
    dump_fasta(store, p)
    assert load_fasta(p) == store


def test_hit_tsv_round_trip():
    h = HitRecord("chrX", 10, 24, "-", 3)
    assert h.to_tsv() == "chrX\t10\t24\t-\t3"
    assert HitRecord.from_tsv(h.to_tsv()) == h
    assert format_hits([h, h]).count("\n") == 2


def _drive(programs, graph, ticks):
    states = {k: p.initial_state() for k, p in programs.items()}
    result = None
    for _ in range(ticks):
        for job in graph.topological_order():
            out = programs[job.id].step(states[job.id])
            if out is None:
                continue
            if not job.output_deps:
                result = out
            for dst in job.output_deps:
                programs[dst].receive(states[dst], job.id, out)
    return result


@pytest.mark.parametrize("replication", [1, 3])
def test_search_programs_finish_in_ticks(replication):
    store = synthetic_store(2, 30_000)
    patterns = random_dictionary(2, 15, store)
    g = decompose_job(JobSpec("genome-search", 100, [3]))
    progs = build_programs(g, 10, store=store, patterns=patterns, replication=replication)
    assert _drive(progs, g, 10) == genome_search(store, patterns)


def test_more_searchers_than_offsets():
    store = SequenceStore({"chrI": "ACGTA"})
    patterns = short(["CG"])
    g = decompose_job(JobSpec("genome-search", 100, [8]))
    progs = build_programs(g, 4, store=store, patterns=patterns)
    assert _drive(progs, g, 4) == genome_search(store, patterns)


def test_sum_programs_finish_in_ticks():
    g = decompose_job(JobSpec("reduction-sum", 100, [2, 3]))
    items = {j.id: list(range(i * 10, i * 10 + 7)) for i, j in enumerate(g.leaves())}
    progs = build_programs(g, 5, leaf_items=items)
    assert _drive(progs, g, 5) == sum(sum(v) for v in items.values())
