"""Core domain types: nodes, links, networks, partitions and device layouts.

All types are immutable; "modifying" a network returns a copy.  Units are SI
throughout (m, m3/s); file parsers convert from L/s and mm.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from .errors import PartitionError

DEFAULT_H_STAR = 19.0


class NodeKind(str, Enum):
    JUNCTION = "junction"
    RESERVOIR = "reservoir"


class LinkStatus(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class Device(str, Enum):
    NONE = "none"
    FLOW_METER = "flow_meter"
    GATE_VALVE = "gate_valve"


def natural_key(s: str):
    """Sort key comparing digit runs numerically ("J2" < "J10")."""
    return tuple((0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|\D+", str(s)))


def natural_sorted(items: Iterable[str]) -> list[str]:
    return sorted(items, key=natural_key)


@dataclass(frozen=True)
class Node:
    """A junction or a fixed-head reservoir.

    For reservoirs ``elevation`` holds the fixed total head (m a.s.l.).
    """

    id: str
    kind: NodeKind = NodeKind.JUNCTION
    elevation: float = 0.0
    base_demand: float = 0.0

    @property
    def is_reservoir(self) -> bool:
        return self.kind == NodeKind.RESERVOIR

    @property
    def head(self) -> float:
        return self.elevation


@dataclass(frozen=True)
class Link:
    id: str
    from_node: str
    to_node: str
    length: float
    diameter: float
    roughness: float
    status: LinkStatus = LinkStatus.OPEN
    device: Device = Device.NONE

    @property
    def is_open(self) -> bool:
        return self.status == LinkStatus.OPEN


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    h_star: float = DEFAULT_H_STAR

    def __post_init__(self):
        # junctions before reservoirs, the order the file format stores them
        nodes = tuple(self.nodes)
        nodes = tuple(n for n in nodes if not n.is_reservoir) + tuple(n for n in nodes if n.is_reservoir)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", tuple(self.links))

    @cached_property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_map(self) -> dict[str, Link]:
        return {lk.id: lk for lk in self.links}

    @property
    def junctions(self) -> list[Node]:
        return [n for n in self.nodes if not n.is_reservoir]

    @property
    def reservoirs(self) -> list[Node]:
        return [n for n in self.nodes if n.is_reservoir]

    @property
    def total_demand(self) -> float:
        return sum(n.base_demand for n in self.junctions)

    def with_links(self, links: Iterable[Link]) -> "Network":
        return replace(self, links=tuple(links))

    def __repr__(self) -> str:
        return (
            f"Network(junctions={len(self.junctions)}, reservoirs={len(self.reservoirs)}, "
            f"links={len(self.links)}, h_star={self.h_star})"
        )


@dataclass(frozen=True)
class Partition:
    """Assignment of node ids to district (DMA) labels."""

    labels: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "labels", {str(k): str(v) for k, v in dict(self.labels).items()})

    @property
    def dmas(self) -> list[str]:
        return natural_sorted(set(self.labels.values()))

    @property
    def cluster_count(self) -> int:
        return len(set(self.labels.values()))

    def members(self, label: str) -> list[str]:
        return [n for n, lab in self.labels.items() if lab == label]

    def label_of(self, node_id: str) -> str:
        try:
            return self.labels[node_id]
        except KeyError:
            raise PartitionError(f"node {node_id!r} has no DMA label") from None

    def __hash__(self):
        return hash(tuple(sorted(self.labels.items())))


@dataclass(frozen=True)
class DividingConfig:
    """Device assignment over a set of boundary links.

    A flow meter leaves its pipe open, a gate valve closes it.
    """

    assignment: Mapping[str, Device] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.assignment).items():
            dev = Device(v)
            if dev == Device.NONE:
                raise ValueError(f"boundary link {k!r} must carry a flow meter or a gate valve")
            clean[str(k)] = dev
        object.__setattr__(self, "assignment", clean)

    @classmethod
    def from_genes(cls, link_ids: Iterable[str], genes: Iterable[int]) -> "DividingConfig":
        link_ids = list(link_ids)
        genes = [int(g) for g in genes]
        if len(link_ids) != len(genes):
            raise ValueError(f"{len(genes)} genes for {len(link_ids)} boundary links")
        return cls({lid: Device.FLOW_METER if g else Device.GATE_VALVE for lid, g in zip(link_ids, genes)})

    @classmethod
    def all_flow_meters(cls, link_ids: Iterable[str]) -> "DividingConfig":
        return cls({lid: Device.FLOW_METER for lid in link_ids})

    def genes(self, link_ids: Iterable[str]) -> tuple[int, ...]:
        return tuple(int(self.assignment[lid] == Device.FLOW_METER) for lid in link_ids)

    @property
    def flow_meters(self) -> frozenset[str]:
        return frozenset(k for k, v in self.assignment.items() if v == Device.FLOW_METER)

    @property
    def gate_valves(self) -> frozenset[str]:
        return frozenset(k for k, v in self.assignment.items() if v == Device.GATE_VALVE)

    @property
    def n_ec(self) -> int:
        return len(self.assignment)

    @property
    def n_fm(self) -> int:
        return len(self.flow_meters)

    @property
    def n_gv(self) -> int:
        return len(self.gate_valves)

    def apply(self, network: Network) -> Network:
        """Return a copy of ``network`` with the devices installed."""
        unknown = set(self.assignment) - set(network.link_map)
        if unknown:
            raise KeyError(f"config names unknown links: {natural_sorted(unknown)}")
        links = []
        for lk in network.links:
            dev = self.assignment.get(lk.id)
            if dev is None:
                links.append(lk)
            elif dev == Device.FLOW_METER:
                links.append(replace(lk, status=LinkStatus.OPEN, device=dev))
            else:
                links.append(replace(lk, status=LinkStatus.CLOSED, device=dev))
        return network.with_links(links)


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self):
        return f"{self.entity}: {self.rule}"


def validate(network: Network) -> list[Violation]:
    """Check every structural invariant; an empty list means the network is sound."""
    out: list[Violation] = []
    seen: set[str] = set()
    for n in network.nodes:
        if n.id in seen:
            out.append(Violation(f"node {n.id}", "duplicate node id"))
        seen.add(n.id)
        if n.is_reservoir and n.base_demand != 0:
            out.append(Violation(f"reservoir {n.id}", "reservoir must not carry demand"))
        if not n.is_reservoir and not n.base_demand >= 0:
            out.append(Violation(f"junction {n.id}", "base demand must be >= 0"))
    if not network.reservoirs:
        out.append(Violation("network", "at least one reservoir is required"))

    seen_links: set[str] = set()
    for lk in network.links:
        ent = f"link {lk.id}"
        if lk.id in seen_links:
            out.append(Violation(ent, "duplicate link id"))
        seen_links.add(lk.id)
        for end in (lk.from_node, lk.to_node):
            if end not in seen:
                out.append(Violation(ent, f"endpoint {end!r} does not exist"))
        if lk.from_node == lk.to_node:
            out.append(Violation(ent, "endpoints must differ"))
        for attr in ("length", "diameter", "roughness"):
            if not getattr(lk, attr) > 0:
                out.append(Violation(ent, f"{attr} must be > 0"))
        if lk.device == Device.GATE_VALVE and lk.status != LinkStatus.CLOSED:
            out.append(Violation(ent, "gate valve requires status closed"))
        if lk.device == Device.FLOW_METER and lk.status != LinkStatus.OPEN:
            out.append(Violation(ent, "flow meter requires status open"))
    if not network.h_star >= 0:
        out.append(Violation("network", "design pressure head must be >= 0"))
    return out


def check_connectivity(network: Network, config: DividingConfig | None = None) -> list[str]:
    """Junctions unreachable from every reservoir over open links.

    Gate valves in ``config`` count as closed, flow meters as open.  An empty
    list means the network is connected.
    """
    closed: set[str] = set()
    reopened: set[str] = set()
    if config is not None:
        closed = set(config.gate_valves)
        reopened = set(config.flow_meters)
    adj: dict[str, list[str]] = {n.id: [] for n in network.nodes}
    for lk in network.links:
        is_open = (lk.is_open or lk.id in reopened) and lk.id not in closed
        if is_open:
            adj[lk.from_node].append(lk.to_node)
            adj[lk.to_node].append(lk.from_node)
    reached = {r.id for r in network.reservoirs}
    queue = deque(reached)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in reached:
                reached.add(v)
                queue.append(v)
    return natural_sorted(n.id for n in network.junctions if n.id not in reached)


def boundary_links(network: Network, partition: Partition) -> frozenset[str]:
    """Links whose two endpoints carry different DMA labels."""
    out = set()
    for lk in network.links:
        if partition.label_of(lk.from_node) != partition.label_of(lk.to_node):
            out.add(lk.id)
    return frozenset(out)


def scale_demands(network: Network, factor: float) -> Network:
    if not factor > 0:
        raise ValueError(f"demand multiplier must be > 0, got {factor}")
    nodes = [replace(n, base_demand=n.base_demand * factor) if not n.is_reservoir else n for n in network.nodes]
    return replace(network, nodes=tuple(nodes))


def open_all(network: Network) -> Network:
    """The un-partitioned network: every pipe open, no devices."""
    return network.with_links(replace(lk, status=LinkStatus.OPEN, device=Device.NONE) for lk in network.links)


def installed_config(network: Network, links: Iterable[str]) -> DividingConfig:
    """Read the device layout currently present on ``links``.

    Links without an explicit device count as flow meters when open and gate
    valves when closed.
    """
    out = {}
    for lid in links:
        lk = network.link_map[lid]
        if lk.device != Device.NONE:
            out[lid] = lk.device
        else:
            out[lid] = Device.FLOW_METER if lk.is_open else Device.GATE_VALVE
    return DividingConfig(out)


def open_internal_valves(network: Network, partition: Partition) -> Network:
    """Open every gate valve that no longer sits on a boundary of ``partition``.

    This is the state of a network right after DMAs were merged: former
    boundary pipes inside a merged district are opened.
    """
    bset = boundary_links(network, partition)
    links = []
    for lk in network.links:
        if lk.device == Device.GATE_VALVE and lk.id not in bset:
            lk = replace(lk, status=LinkStatus.OPEN, device=Device.NONE)
        links.append(lk)
    return network.with_links(links)


def bind_partition(network: Network, partition: Partition) -> Partition:
    """Check ``partition`` against ``network`` and label any unlabeled reservoir.

    A reservoir missing from the partition joins the DMA of its nearest
    junction by hop count (ties go to the naturally-smallest junction id).
    """
    unknown = set(partition.labels) - set(network.node_map)
    if unknown:
        raise PartitionError(f"partition names nodes absent from the network: {natural_sorted(unknown)}")
    missing = [n.id for n in network.junctions if n.id not in partition.labels]
    if missing:
        raise PartitionError(f"junctions without a DMA label: {natural_sorted(missing)}")
    labels = dict(partition.labels)
    adj: dict[str, list[str]] = {n.id: [] for n in network.nodes}
    for lk in network.links:
        adj[lk.from_node].append(lk.to_node)
        adj[lk.to_node].append(lk.from_node)
    for res in network.reservoirs:
        if res.id in labels:
            continue
        frontier, seen = [res.id], {res.id}
        found = None
        while frontier and found is None:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            hits = [v for v in nxt if v in partition.labels and not network.node_map[v].is_reservoir]
            if hits:
                found = natural_sorted(hits)[0]
            frontier = nxt
        if found is None:
            raise PartitionError(f"reservoir {res.id!r} is not connected to any labelled junction")
        labels[res.id] = partition.labels[found]
    return Partition(labels)


def disconnected_dmas(network: Network, partition: Partition) -> list[str]:
    """DMA labels whose nodes do not form a connected subgraph."""
    adj: dict[str, list[str]] = {n: [] for n in partition.labels}
    for lk in network.links:
        a, b = lk.from_node, lk.to_node
        if partition.labels.get(a) is not None and partition.labels.get(a) == partition.labels.get(b):
            adj[a].append(b)
            adj[b].append(a)
    bad = []
    for dma in partition.dmas:
        members = partition.members(dma)
        seen = {members[0]}
        queue = deque([members[0]])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if len(seen) != len(members):
            bad.append(dma)
    return bad
