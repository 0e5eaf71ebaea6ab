import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynadma.errors import PartitionError
from dynadma.hydraulics import solve
from dynadma.model import DividingConfig, Network, Partition, bind_partition, boundary_links, open_all
from dynadma.multiscale import C_OPT_CONSTANT, balance_index, build_ms_network, optimal_cluster_count, partition_metrics

from netfixtures import fig1_toy, fixture_suite, grid, junction, pipe, reservoir


def two_paths():
    """Districts A and B, each a three-junction path, tied at both ends."""
    nodes = [reservoir("R1", 50.0)] + [junction(j, 0.0, 0.001) for j in ("a1", "a2", "a3", "b1", "b2", "b3")]
    links = [
        pipe("P1", "a1", "a2", 120.0), pipe("P2", "a2", "a3", 80.0),
        pipe("P3", "b1", "b2", 60.0), pipe("P4", "b2", "b3", 90.0),
        pipe("P5", "a1", "b1", 200.0), pipe("P6", "a3", "b3", 210.0),
        pipe("P7", "R1", "a2", 50.0),
    ]
    net = Network(tuple(nodes), tuple(links))
    part = bind_partition(net, Partition({"a1": "A", "a2": "A", "a3": "A", "b1": "B", "b2": "B", "b3": "B"}))
    return net, part


def shortest_by_enumeration(network, partition, dma, u, v):
    """Minimum path length over every simple path inside one district."""
    g = nx.MultiGraph()
    for lk in network.links:
        if partition.labels[lk.from_node] == dma == partition.labels[lk.to_node]:
            g.add_edge(lk.from_node, lk.to_node, key=lk.id, length=lk.length)
    best = math.inf
    for path in nx.all_simple_edge_paths(g, u, v):
        best = min(best, sum(g.edges[e]["length"] for e in path))
    return best


class TestBuild:
    def test_single_district_is_empty(self):
        net, part = fig1_toy()
        ms = build_ms_network(net, Partition({n: "X" for n in part.labels}))
        assert ms.ms_nodes == {} and ms.boundary_hyperlinks == () and ms.internal_hyperlinks == ()

    def test_fig1_structure(self):
        net, part = fig1_toy()
        ms = build_ms_network(net, part)
        assert set(ms.ms_nodes) == {"J2", "J3", "J4", "J5", "J6", "J7", "J8", "J9", "J10", "J11"}
        assert [b.id for b in ms.boundary_hyperlinks] == ["P11", "P12", "P13", "P14", "P15"]
        per_dma = {d: sum(1 for i in ms.internal_hyperlinks if i.dma == d) for d in "ABCD"}
        assert per_dma == {"A": 1, "B": 3, "C": 3, "D": 1}
        assert "J1" not in ms.ms_nodes and "J12" not in ms.ms_nodes

    def test_two_paths_weights(self):
        net, part = two_paths()
        ms = build_ms_network(net, part)
        assert len(ms.ms_nodes) == 4
        assert len(ms.boundary_hyperlinks) == 2
        weights = {(i.u, i.v): i.weight for i in ms.internal_hyperlinks}
        assert weights == {
            ("a1", "a3"): shortest_by_enumeration(net, part, "A", "a1", "a3"),
            ("b1", "b3"): shortest_by_enumeration(net, part, "B", "b1", "b3"),
        }
        assert weights[("a1", "a3")] == 200.0

    def test_unreachable_boundary_nodes(self):
        net, part = two_paths()
        net = net.with_links(lk for lk in net.links if lk.id != "P4")
        with pytest.raises(PartitionError, match="'B'"):
            build_ms_network(net, part)

    def test_custom_weight(self):
        net, part = two_paths()
        ms = build_ms_network(net, part, weight=lambda lk: 1.0)
        assert {i.weight for i in ms.internal_hyperlinks} == {2.0}


class TestInvariants:
    @pytest.mark.parametrize("name", sorted(fixture_suite()))
    def test_structure(self, name):
        net, part = fixture_suite()[name]
        ms = build_ms_network(net, part)
        bset = boundary_links(net, part)
        assert len(ms.ms_nodes) <= 2 * len(bset)
        assert {b.id for b in ms.boundary_hyperlinks} == bset
        # contract-then-expand reproduces district membership
        assert all(part.labels[n] == d for n, d in ms.ms_nodes.items())
        for d, members in ms.dma_index.items():
            pairs = {frozenset((i.u, i.v)) for i in ms.internal_hyperlinks if i.dma == d}
            assert len(pairs) == len(members) * (len(members) - 1) // 2

    @pytest.mark.parametrize("name", sorted(fixture_suite()))
    def test_internal_weights_match_enumeration(self, name):
        net, part = fixture_suite()[name]
        ms = build_ms_network(net, part)
        for i in ms.internal_hyperlinks:
            assert part.labels[i.u] == part.labels[i.v] == i.dma
            assert i.weight == pytest.approx(shortest_by_enumeration(net, part, i.dma, i.u, i.v), rel=1e-12)
            # the witness path stays inside the district and re-measures to the weight
            for lid in i.path:
                lk = net.link_map[lid]
                assert part.labels[lk.from_node] == part.labels[lk.to_node] == i.dma
            assert sum(net.link_map[lid].length for lid in i.path) == pytest.approx(i.weight, rel=1e-12)

    @given(st.integers(0, 1000))
    @settings(max_examples=15, deadline=None)
    def test_random_grids(self, seed):
        net, part = grid(4, 5, (2, 3), (2, 2), seed=seed, h_star=0.0)
        ms = build_ms_network(net, part)
        assert len(ms.ms_nodes) <= 2 * len(boundary_links(net, part))
        for i in ms.internal_hyperlinks:
            assert sum(net.link_map[lid].length for lid in i.path) == pytest.approx(i.weight, rel=1e-12)

    def test_deterministic(self):
        net, part = fig1_toy()
        assert build_ms_network(net, part) == build_ms_network(net, part)


class TestBalance:
    def test_equal_sizes(self):
        assert balance_index(Partition({"a": "X", "b": "X", "c": "Y", "d": "Y"})) == 0.0

    def test_two_and_four(self):
        labels = {"a": "X", "b": "X", "c": "Y", "d": "Y", "e": "Y", "f": "Y"}
        assert balance_index(Partition(labels)) == 1.0

    def test_reservoirs_excluded(self):
        net, part = fig1_toy()
        assert balance_index(part, net) == 0.0
        assert balance_index(part) > 0.0


class TestClusterCount:
    def test_calibration_point(self):
        assert optimal_cluster_count(184) == 4

    def test_floor(self):
        assert optimal_cluster_count(2) == 2

    def test_large(self):
        assert optimal_cluster_count(10000) == round(0.93 * 10000**0.28) == round(C_OPT_CONSTANT * 10000**0.28)

    def test_too_small(self):
        with pytest.raises(ValueError):
            optimal_cluster_count(1)


class TestMetricsRow:
    def test_no_config_nulls(self):
        net, _ = fig1_toy()
        row = partition_metrics(open_all(net), None, None, solve(open_all(net)), name="un-partitioned")
        assert (row.n_ec, row.n_fm, row.n_gv, row.balance_index) == (None, None, None, None)

    def test_all_meters(self):
        net, part = fig1_toy()
        cfg = DividingConfig.all_flow_meters(boundary_links(net, part))
        row = partition_metrics(net, part, cfg, solve(net, cfg))
        assert (row.n_ec, row.n_fm, row.n_gv) == (5, 5, 0)

    def test_mismatched_config(self):
        net, part = fig1_toy()
        cfg = DividingConfig.all_flow_meters(["P11"])
        with pytest.raises(ValueError):
            partition_metrics(net, part, cfg, solve(net, cfg))
