"""Constrained Girvan-Newman aggregation of districts on the MS network.

Only boundary hyper-links are ever cut, so a district (held together by its
complete graph of internal hyper-links) can never be split, and the new
boundary pipes are always a subset of the old ones.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import AggregationError
from .model import Partition, boundary_links, natural_key, natural_sorted
from .multiscale import MsNetwork

Edge = tuple[str, str, str, float]  # (id, u, v, weight)

_TIE_RTOL = 1e-9


def _close(a: float, b: float, rtol: float = 1e-12) -> bool:
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def edge_betweenness(edges: Iterable[Edge]) -> dict[str, float]:
    """Weighted shortest-path edge betweenness (Brandes accumulation).

    Every unordered pair of nodes in the same component spreads one unit
    evenly over its shortest paths.  Parallel edges are distinct edges.
    Distances within a relative 1e-12 of each other count as ties.
    """
    edges = list(edges)
    adj: dict[str, list[tuple[str, str, float]]] = defaultdict(list)
    eb: dict[str, float] = {}
    for eid, u, v, w in sorted(edges, key=lambda e: natural_key(e[0])):
        if not w > 0:
            raise ValueError(f"edge {eid!r} has non-positive weight {w}")
        if eid in eb:
            raise ValueError(f"duplicate edge id {eid!r}")
        eb[eid] = 0.0
        if u == v:
            continue
        adj[u].append((v, eid, float(w)))
        adj[v].append((u, eid, float(w)))

    for s in natural_sorted(adj):
        dist: dict[str, float] = {s: 0.0}
        sigma: dict[str, int] = defaultdict(int)
        sigma[s] = 1
        preds: dict[str, list[tuple[str, str]]] = defaultdict(list)
        done: set[str] = set()
        order: list[str] = []
        heap = [(0.0, 0, s)]
        counter = 1
        while heap:
            d, _, v = heapq.heappop(heap)
            if v in done:
                continue
            done.add(v)
            order.append(v)
            for w, eid, wt in adj[v]:
                if w in done:
                    continue
                nd = d + wt
                if w not in dist or (nd < dist[w] and not _close(nd, dist[w])):
                    dist[w] = nd
                    sigma[w] = sigma[v]
                    preds[w] = [(v, eid)]
                    heapq.heappush(heap, (nd, counter, w))
                    counter += 1
                elif _close(nd, dist[w]):
                    sigma[w] += sigma[v]
                    preds[w].append((v, eid))
        delta: dict[str, float] = defaultdict(float)
        for w in reversed(order):
            for v, eid in preds[w]:
                c = sigma[v] / sigma[w] * (1.0 + delta[w])
                eb[eid] += c
                delta[v] += c
    return {k: v / 2.0 for k, v in eb.items()}


def _component_count(nodes: Iterable[str], edges: Iterable[Edge]) -> tuple[int, dict[str, str]]:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, u, v, _ in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv, key=natural_key)] = min(ru, rv, key=natural_key)
    roots = {n: find(n) for n in parent}
    return len(set(roots.values())), roots


@dataclass(frozen=True)
class AggregationResult:
    super_labels: dict[str, str]
    new_partition: Partition | None
    new_boundary_links: frozenset[str] | None
    removed_edges_log: list[tuple[str, float]] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(set(self.super_labels.values()))


def _placeholder(dma: str) -> str:
    return f"dma:{dma}"


def girvan_newman_aggregate(ms: MsNetwork, c_target: int) -> AggregationResult:
    """Merge the districts of ``ms`` into exactly ``c_target`` larger ones.

    The boundary hyper-link of highest betweenness is removed repeatedly
    (betweenness recomputed after each cut, ties to the lowest link id)
    until the MS graph falls apart into ``c_target`` components.
    """
    n_dma = len(ms.dmas)
    if not 1 <= c_target <= n_dma:
        raise ValueError(f"target cluster count must be in [1, {n_dma}], got {c_target}")
    if not ms.ms_nodes and c_target != n_dma:
        raise AggregationError("MS network is empty: there are no boundary links to aggregate over")

    nodes = list(ms.ms_nodes) + [_placeholder(d) for d in ms.isolated_dmas]
    internal = [(i.id, i.u, i.v, i.weight) for i in ms.internal_hyperlinks]
    active = {b.id: (b.id, b.u, b.v, b.weight) for b in ms.boundary_hyperlinks}
    count, roots = _component_count(nodes, internal + list(active.values()))
    if c_target < count:
        raise AggregationError(
            f"the network already splits into {count} disconnected groups; cannot aggregate to {c_target}"
        )

    log: list[tuple[str, float]] = []
    while count < c_target:
        eb = edge_betweenness(internal + list(active.values()))
        best_val = max(eb[k] for k in active)
        tied = [k for k in active if abs(eb[k] - best_val) <= _TIE_RTOL * max(1.0, best_val)]
        cut = natural_sorted(tied)[0]
        del active[cut]
        log.append((cut, eb[cut]))
        new_count, roots = _component_count(nodes, internal + list(active.values()))
        if new_count < count:
            raise AggregationError("component count decreased during edge removal")
        count = new_count

    # each district's members share a root: map district -> root
    dma_root: dict[str, str] = {}
    for dma in ms.dmas:
        members = ms.dma_index.get(dma) or [_placeholder(dma)]
        rset = {roots[m] for m in members}
        if len(rset) != 1:
            raise AggregationError(f"district {dma!r} was split across super-districts")
        dma_root[dma] = rset.pop()
    groups: dict[str, list[str]] = defaultdict(list)
    for dma, root in dma_root.items():
        groups[root].append(dma)
    ordered = sorted(groups.values(), key=lambda g: natural_key(natural_sorted(g)[0]))
    super_labels = {}
    for i, g in enumerate(ordered, start=1):
        for dma in g:
            super_labels[dma] = f"S{i}"
    if len(ordered) != c_target:
        raise AggregationError(f"aggregation produced {len(ordered)} clusters instead of {c_target}")

    new_partition = new_boundary = None
    if ms.partition is not None and ms.network is not None:
        new_partition = Partition({n: super_labels[d] for n, d in ms.partition.labels.items()})
        new_boundary = boundary_links(ms.network, new_partition)
        old_boundary = boundary_links(ms.network, ms.partition)
        if not new_boundary <= old_boundary:
            raise AggregationError("new boundary links are not a subset of the original boundary links")
    return AggregationResult(super_labels, new_partition, new_boundary, log)
