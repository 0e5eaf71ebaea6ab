"""Synthetic benchmark networks.

``make_parete_like`` builds a 184-node / 282-pipe looped network with two
110 m reservoirs and a 9-district partition, sized after a medium town
network.  The bundled copy under ``data/`` is this generator's output for the
default arguments.
"""
from __future__ import annotations

from decimal import Decimal
from importlib import resources

import numpy as np

from .model import Device, Link, LinkStatus, Network, Node, NodeKind, Partition, bind_partition, boundary_links, natural_sorted

N_COLS, N_ROWS = 14, 13
COL_BLOCKS = (6, 4, 4)
ROW_BLOCKS = (5, 4, 4)
RESERVOIR_HEAD = 110.0
PEAK_DEMAND_LPS = 110.2


def _block(sizes, i):
    acc = 0
    for b, s in enumerate(sizes):
        acc += s
        if i < acc:
            return b
    raise IndexError(i)


def _connected(nodes, edges):
    nodes = set(nodes)
    if not nodes:
        return True
    adj = {n: [] for n in nodes}
    for u, v in edges:
        if u in nodes and v in nodes:
            adj[u].append(v)
            adj[v].append(u)
    start = next(iter(nodes))
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(nodes)


def make_parete_like(
    seed: int = 14,
    n_boundary: int = 33,
    n_flow_meters: int = 13,
    diameter_scale: float = 0.8,
) -> tuple[Network, Partition]:
    """Generate the synthetic network and its 9-district partition.

    Boundary pipes carry the devices of the existing layout: ``n_flow_meters``
    flow meters, the rest gate valves (closed).
    """
    rng = np.random.default_rng(seed)
    jid = lambda r, c: f"J{r * N_COLS + c + 1}"  # noqa: E731
    dma_of = {}
    for r in range(N_ROWS):
        for c in range(N_COLS):
            dma_of[jid(r, c)] = f"D{_block(ROW_BLOCKS, r) * 3 + _block(COL_BLOCKS, c) + 1}"

    cand = []
    for r in range(N_ROWS):
        for c in range(N_COLS):
            if c + 1 < N_COLS:
                cand.append((jid(r, c), jid(r, c + 1)))
            if r + 1 < N_ROWS:
                cand.append((jid(r, c), jid(r + 1, c)))
    boundary = [e for e in cand if dma_of[e[0]] != dma_of[e[1]]]
    internal = [e for e in cand if dma_of[e[0]] == dma_of[e[1]]]

    # thin boundary pipes while every adjacent district pair stays linked
    keep_b = list(boundary)
    order = rng.permutation(len(boundary))
    for i in order:
        if len(keep_b) <= n_boundary:
            break
        e = boundary[i]
        pair = frozenset((dma_of[e[0]], dma_of[e[1]]))
        if sum(1 for f in keep_b if frozenset((dma_of[f[0]], dma_of[f[1]])) == pair) > 1:
            keep_b.remove(e)

    n_internal = 280 - len(keep_b)
    keep_i = list(internal)
    members = {}
    for n, d in dma_of.items():
        members.setdefault(d, []).append(n)
    for i in rng.permutation(len(internal)):
        if len(keep_i) <= n_internal:
            break
        e = internal[i]
        trial = [f for f in keep_i if f != e]
        if _connected(members[dma_of[e[0]]], trial):
            keep_i = trial

    # terrain falls away from the two sources; pressures span roughly 20-50 m
    coords = {jid(r, c): (r, c) for r in range(N_ROWS) for c in range(N_COLS)}
    src_a, src_b = jid(0, 0), jid(N_ROWS - 1, N_COLS - 1)

    def dist_to_src(n):
        r, c = coords[n]
        return min(r + c, (N_ROWS - 1 - r) + (N_COLS - 1 - c))

    nodes = []
    weights = rng.gamma(2.0, 1.0, size=N_ROWS * N_COLS)
    weights[rng.random(N_ROWS * N_COLS) < 0.08] = 0.0
    # whole mL/s per node, remainder on the largest so the total is exact
    ml = np.round(weights * (PEAK_DEMAND_LPS * 1000) / weights.sum()).astype(int)
    ml[int(np.argmax(ml))] += int(round(PEAK_DEMAND_LPS * 1000)) - int(ml.sum())
    for k, (n, (r, c)) in enumerate(coords.items()):
        elev = 58.0 + 20.0 * (1.0 - dist_to_src(n) / 12.0) * rng.uniform(0.6, 1.0) + rng.uniform(0, 6)
        demand = float(Decimal(int(ml[k])).scaleb(-6))
        nodes.append(Node(n, NodeKind.JUNCTION, float(np.round(elev, 2)), demand))
    nodes.append(Node("R1", NodeKind.RESERVOIR, RESERVOIR_HEAD))
    nodes.append(Node("R2", NodeKind.RESERVOIR, RESERVOIR_HEAD))

    sizes_mm = np.array([100.0, 125.0, 150.0, 200.0, 250.0, 300.0])
    links = []
    pid = 0

    def pipe(u, v, trunk=False):
        nonlocal pid
        pid += 1
        d_near = min(dist_to_src(u), dist_to_src(v))
        base = 5 if trunk else max(0, 4 - d_near // 3)
        idx = int(np.clip(base + rng.integers(-1, 1), 0, len(sizes_mm) - 1))
        diam = sizes_mm[idx] * diameter_scale / 1000.0
        length = float(np.round(rng.uniform(80.0, 220.0), 1))
        return Link(f"P{pid}", u, v, length, float(np.round(diam, 4)), 130.0)

    for e in sorted(keep_i + keep_b, key=lambda e: (coords[e[0]], coords[e[1]])):
        links.append(pipe(*e))
    links.append(Link(f"P{pid + 1}", "R1", src_a, 300.0, 0.4 * diameter_scale, 130.0))
    links.append(Link(f"P{pid + 2}", "R2", src_b, 300.0, 0.4 * diameter_scale, 130.0))
    network = Network(tuple(nodes), tuple(links), 19.0)

    labels = dict(dma_of)
    partition = Partition(labels)
    network = _install_devices(network, partition, n_flow_meters, rng)
    return network, partition


def _install_devices(network: Network, partition: Partition, n_fm: int, rng) -> Network:
    """Flow meters on a spanning set of district connections, gate valves elsewhere."""
    partition = bind_partition(network, partition)
    bl = natural_sorted(boundary_links(network, partition))
    lmap = network.link_map
    dmas = partition.dmas
    root = {d: d for d in dmas}

    def find(x):
        while root[x] != x:
            x = root[x]
        return x

    fm = []
    for i in rng.permutation(len(bl)):
        lk = lmap[bl[i]]
        a, b = find(partition.labels[lk.from_node]), find(partition.labels[lk.to_node])
        if a != b:
            root[a] = b
            fm.append(lk.id)
    rest = [lid for lid in bl if lid not in fm]
    extra = rng.permutation(len(rest))[: max(0, n_fm - len(fm))]
    fm += [rest[i] for i in extra]
    fm_set = set(fm)
    links = []
    for lk in network.links:
        if lk.id in fm_set:
            lk = Link(lk.id, lk.from_node, lk.to_node, lk.length, lk.diameter, lk.roughness, LinkStatus.OPEN, Device.FLOW_METER)
        elif lk.id in bl:
            lk = Link(lk.id, lk.from_node, lk.to_node, lk.length, lk.diameter, lk.roughness, LinkStatus.CLOSED, Device.GATE_VALVE)
        links.append(lk)
    return network.with_links(links)


def data_path(name: str):
    return resources.files("dynadma") / "data" / name


def load_parete_like() -> tuple[Network, Partition]:
    """Load the bundled synthetic network and partition."""
    from .inp import parse_network, parse_partition

    net = parse_network(data_path("parete_like.inp").read_text())
    part = parse_partition(data_path("parete_like_dma.csv").read_text())
    return net, part
