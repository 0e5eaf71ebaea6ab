import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynadma.community import edge_betweenness, girvan_newman_aggregate
from dynadma.errors import AggregationError
from dynadma.model import Network, Partition, bind_partition, boundary_links
from dynadma.multiscale import build_ms_network

from netfixtures import barbell, edge_path_betweenness, fig1_toy, grid, junction, pipe, reservoir


def exact_match(got: float, want: Fraction) -> bool:
    return abs(Fraction(got) - want) <= Fraction(1, 10**12) * max(1, abs(want))


def random_connected(rng: random.Random, n: int):
    """Random spanning tree plus extra edges (some parallel), integer weights."""
    nodes = [f"v{i}" for i in range(n)]
    edges = []
    for i in range(1, n):
        edges.append((f"e{len(edges)}", nodes[i], nodes[rng.randrange(i)], rng.randint(1, 3)))
    for _ in range(rng.randint(0, n * (n - 1) // 2)):
        u, v = rng.sample(nodes, 2)
        edges.append((f"e{len(edges)}", u, v, rng.randint(1, 3)))
    return nodes, edges


class TestEdgeBetweenness:
    def test_path(self):
        eb = edge_betweenness([("ab", "a", "b", 1.0), ("bc", "b", "c", 1.0)])
        assert eb == {"ab": 2.0, "bc": 2.0}

    def test_single_edge(self):
        assert edge_betweenness([("e", "a", "b", 3.0)]) == {"e": 1.0}

    def test_four_cycle(self):
        # adjacent pairs give 1 each; the two opposite pairs split 0.5 onto every edge
        edges = [("e1", "a", "b", 1), ("e2", "b", "c", 1), ("e3", "c", "d", 1), ("e4", "d", "a", 1)]
        want = edge_path_betweenness("abcd", edges)
        assert set(want.values()) == {Fraction(2)}
        assert edge_betweenness(edges) == {k: 2.0 for k in want}

    def test_disconnected_pairs_ignored(self):
        eb = edge_betweenness([("e1", "a", "b", 1), ("e2", "c", "d", 1)])
        assert eb == {"e1": 1.0, "e2": 1.0}

    def test_rejects_non_positive_weight(self):
        with pytest.raises(ValueError):
            edge_betweenness([("e", "a", "b", 0.0)])

    def test_matches_path_enumeration_on_random_graphs(self):
        rng = random.Random(20240611)
        for _ in range(250):
            nodes, edges = random_connected(rng, rng.randint(2, 8))
            want = edge_path_betweenness(nodes, edges)
            got = edge_betweenness(edges)
            assert all(exact_match(got[k], want[k]) for k in want)

    @given(st.integers(2, 8), st.integers(0, 2**32))
    @settings(max_examples=60, deadline=None)
    def test_agrees_with_networkx_on_simple_graphs(self, n, seed):
        g = nx.gnp_random_graph(n, 0.6, seed=seed)
        r = random.Random(seed)
        edges = [(f"{u}-{v}", str(u), str(v), float(r.randint(1, 4))) for u, v in g.edges]
        if not edges:
            return
        ref = nx.Graph()
        ref.add_weighted_edges_from((u, v, w) for _, u, v, w in edges)
        want = nx.edge_betweenness_centrality(ref, normalized=False, weight="weight")
        got = edge_betweenness(edges)
        for eid, u, v, _ in edges:
            w = want[(u, v)] if (u, v) in want else want[(v, u)]
            assert got[eid] == pytest.approx(w, rel=1e-9)


class TestAggregate:
    def test_barbell_cuts_bridge(self):
        net, part, bridge = barbell()
        ms = build_ms_network(net, part)
        # exact oracle: the bridge carries the highest betweenness before any cut
        want = edge_path_betweenness(list(ms.ms_nodes), [(e, u, v, int(w)) for e, u, v, w in ms.edges()])
        boundary = {b.id for b in ms.boundary_hyperlinks}
        top = max(want[k] for k in boundary)
        assert [k for k in boundary if want[k] == top] == [bridge]

        agg = girvan_newman_aggregate(ms, 2)
        assert [lid for lid, _ in agg.removed_edges_log] == [bridge]
        assert agg.new_boundary_links == {bridge}
        assert agg.super_labels == {"A": "S1", "B": "S1", "C": "S1", "D": "S2", "E": "S2", "F": "S2"}

    def test_identity(self):
        net, part = fig1_toy()
        agg = girvan_newman_aggregate(build_ms_network(net, part), 4)
        assert agg.new_boundary_links == boundary_links(net, part)
        assert agg.n_clusters == 4
        assert sorted(agg.super_labels.values()) == ["S1", "S2", "S3", "S4"]

    def test_single_cluster(self):
        net, part = fig1_toy()
        agg = girvan_newman_aggregate(build_ms_network(net, part), 1)
        assert set(agg.super_labels.values()) == {"S1"}
        assert agg.new_boundary_links == frozenset()
        assert agg.removed_edges_log == []

    @pytest.mark.parametrize("c", [0, 5])
    def test_out_of_range(self, c):
        net, part = fig1_toy()
        with pytest.raises(ValueError):
            girvan_newman_aggregate(build_ms_network(net, part), c)

    def test_empty_ms_network(self):
        net, part = fig1_toy()
        two = Partition({n: "X" for n in part.labels})
        ms = build_ms_network(net, two)
        assert girvan_newman_aggregate(ms, 1).n_clusters == 1
        with pytest.raises(ValueError):
            girvan_newman_aggregate(ms, 2)

    def test_isolated_district_is_its_own_cluster(self):
        net, part = fig1_toy()
        extra_nodes = (reservoir("R2", 40.0), junction("K1", 0, 0.001), junction("K2", 0, 0.001))
        extra_links = (pipe("Q1", "R2", "K1"), pipe("Q2", "K1", "K2"))
        big = Network(net.nodes + extra_nodes, net.links + extra_links, net.h_star)
        labels = dict(part.labels, K1="E", K2="E", R2="E")
        ms = build_ms_network(big, bind_partition(big, Partition(labels)))
        assert ms.isolated_dmas == ["E"]
        with pytest.raises(AggregationError):
            girvan_newman_aggregate(ms, 1)
        agg = girvan_newman_aggregate(ms, 2)
        assert agg.super_labels == {"A": "S1", "B": "S1", "C": "S1", "D": "S1", "E": "S2"}

    def test_deterministic(self):
        net, part = grid(6, 6, (2, 2, 2), (3, 3), seed=7, h_star=0.0)
        ms = build_ms_network(net, part)
        assert girvan_newman_aggregate(ms, 3) == girvan_newman_aggregate(ms, 3)

    @given(st.integers(0, 10_000), st.integers(1, 6))
    @settings(max_examples=25, deadline=None)
    def test_invariants(self, seed, c):
        net, part = grid(6, 6, (2, 2, 2), (3, 3), seed=seed, h_star=0.0)
        ms = build_ms_network(net, part)
        agg = girvan_newman_aggregate(ms, c)
        assert agg.n_clusters == c
        assert agg.new_boundary_links <= boundary_links(net, part)
        for node, dma in part.labels.items():
            assert agg.new_partition.labels[node] == agg.super_labels[dma]
        assert boundary_links(net, agg.new_partition) == agg.new_boundary_links
