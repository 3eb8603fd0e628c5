import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftsim.model import (
    ComputeCore,
    CoreStatus,
    DependencyGraph,
    InsufficientCoresError,
    JobSpec,
    SubJob,
    Topology,
    VirtualCore,
    adjacent_alive,
    decompose_job,
    dependency_count,
    place_on_agents,
    place_on_vcores,
)

widths = st.lists(st.integers(1, 6), min_size=1, max_size=5)


def reduction(w, kb=1000):
    return decompose_job(JobSpec("reduction-sum", kb, w))


def brute_z(graph, node_id):
    # count edges touching the node from the edge list, not the node's own lists
    return sum(1 for a, b in graph.edges if node_id in (a, b))


def test_three_by_three_tree_has_thirteen_nodes():
    g = reduction([3, 3, 3])
    assert len(g) == 13
    assert len(g.leaves()) == 9
    assert [j.id for j in g.sinks()] == ["root"]


def test_single_input_chain():
    g = decompose_job(JobSpec("reduction-sum", 8, [1]))
    assert len(g) == 3
    assert g["leaf-0-0"].data_size_kb == 8
    assert g["leaf-0-0"].output_deps == ["node-0"]
    assert g["node-0"].output_deps == ["root"]


def test_genome_eleven_searchers_one_combiner():
    g = decompose_job(JobSpec("genome-search", 2 ** 19, [11]))
    assert len(g) == 12
    assert sum(j.op.value == "search" for j in g) == 11
    assert g["combine"].input_deps == [f"search-{i}" for i in range(11)]


def test_dependency_count_examples():
    interior = SubJob("n", "interior-reduce", 1, 1, ["a", "b"], ["r"])
    assert dependency_count(interior) == 3
    root = SubJob("r", "interior-reduce", 1, 1, ["a", "b", "c"], [])
    assert dependency_count(root) == 3


def test_scenario_z_for_genome_configurations():
    z4 = decompose_job(JobSpec("genome-search", 2 ** 19, [3]))
    assert max(brute_z(z4, j.id) for j in z4) == 3
    assert z4.scenario_dependency_count() == 4
    assert decompose_job(JobSpec("genome-search", 2 ** 19, [11])).scenario_dependency_count() == 12


@pytest.mark.parametrize("bad", [dict(total_data_kb=0, fan_widths=[1]), dict(total_data_kb=5, fan_widths=[]),
                                 dict(total_data_kb=5, fan_widths=[2, 0])])
def test_jobspec_rejects_invalid(bad):
    with pytest.raises(ValueError):
        JobSpec("reduction-sum", **bad)


def test_decompose_rejects_zero_leaves():
    spec = JobSpec("reduction-sum", 5, [1])
    spec.fan_widths = [0]
    with pytest.raises(ValueError):
        decompose_job(spec)


def test_subjob_rejects_self_and_duplicate_deps():
    with pytest.raises(ValueError):
        SubJob("a", "search", 1, 1, ["a"])
    with pytest.raises(ValueError):
        SubJob("a", "search", 1, 1, ["b", "b"])


def test_cycle_detected():
    g = DependencyGraph({
        "a": SubJob("a", "interior-reduce", 1, 1, ["b"], ["b"]),
        "b": SubJob("b", "interior-reduce", 1, 1, ["a"], ["a"]),
    })
    with pytest.raises(ValueError, match="cycle"):
        g.topological_order()


@settings(max_examples=60, deadline=None)
@given(widths, st.integers(1, 10 ** 6))
def test_decomposition_properties(w, kb):
    g = reduction(w, kb)
    g.validate()
    assert sum(j.data_size_kb for j in g.leaves()) == kb
    for job in g:
        assert dependency_count(job) == brute_z(g, job.id)
        if job.id != "root":
            assert len(job.output_deps) == 1
    # every leaf reaches the root
    for leaf in g.leaves():
        cur = leaf
        while cur.output_deps:
            cur = g[cur.output_deps[0]]
        assert cur.id == "root"
    assert len(g.topological_order()) == len(g)


@settings(max_examples=40, deadline=None)
@given(widths, st.integers(1, 10 ** 6))
def test_remainder_goes_to_last_leaf(w, kb):
    g = reduction(w, kb)
    sizes = [j.data_size_kb for j in g.leaves()]
    assert len(set(sizes[:-1])) <= 1
    assert sizes[-1] >= sizes[0]


def test_place_on_agents_bijection():
    g = reduction([3, 3, 3])
    agents = place_on_agents(g, Topology.complete(16).alive())
    assert len(agents) == 13
    assert len({a.location for a in agents}) == 13
    by_payload = {a.payload: a for a in agents}
    assert by_payload["node-1"].known_dependencies == {
        d: by_payload[d].location for d in ["leaf-1-0", "leaf-1-1", "leaf-1-2", "root"]
    }


def test_genome_four_on_four_cores():
    g = decompose_job(JobSpec("genome-search", 2 ** 19, [3]))
    agents = place_on_agents(g, Topology.complete(4).alive())
    assert sorted(a.location for a in agents) == [0, 1, 2, 3]


def test_insufficient_cores():
    g = decompose_job(JobSpec("genome-search", 10, [4]))
    with pytest.raises(InsufficientCoresError):
        place_on_agents(g, Topology.complete(4).alive())


def test_place_on_vcores():
    g = reduction([3, 3, 3])
    vcores = [VirtualCore(i, i) for i in range(16)]
    placement = place_on_vcores(g, vcores)
    assert len(placement) == 13
    assert sum(v.hosted is not None for v in vcores) == 13


def test_place_on_vcores_skips_failed_core():
    topo = Topology.complete(5)
    topo[0].status = CoreStatus.FAILED
    g = decompose_job(JobSpec("genome-search", 10, [3]))
    placement = place_on_vcores(g, [VirtualCore(i, i) for i in range(5)], topo)
    assert 0 not in placement.values()
    assert sorted(placement.values()) == [1, 2, 3, 4]


def test_z12_full_placement():
    g = decompose_job(JobSpec("genome-search", 2 ** 19, [11]))
    placement = place_on_vcores(g, [VirtualCore(i, i) for i in range(12)])
    assert sorted(placement.values()) == list(range(12))


def test_adjacent_alive_ring():
    topo = Topology.ring(4)
    assert [c.id for c in adjacent_alive(topo[0], topo)] == [1, 3]
    topo[1].status = CoreStatus.FAILED
    assert [c.id for c in adjacent_alive(topo[0], topo)] == [3]
    topo[3].status = CoreStatus.FAILED
    assert adjacent_alive(topo[0], topo) == []


def test_adjacent_alive_keeps_predicted_fail():
    topo = Topology.complete(3)
    topo[2].status = CoreStatus.PREDICTED_FAIL
    assert [c.id for c in adjacent_alive(topo[0], topo)] == [1, 2]


def test_topology_symmetry_and_hops():
    with pytest.raises(ValueError):
        Topology([ComputeCore(0, [1]), ComputeCore(1, [])])
    grid = Topology.grid(3, 3)
    assert grid.hops(0, 8) == 4
    assert grid[4].neighbors == [1, 3, 5, 7]
