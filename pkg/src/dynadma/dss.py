"""Decision support: rank feasible layouts and assemble the report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .dividing import Individual, genes_from_str, genes_to_str
from .errors import ConvergenceError, HydraulicError
from .hydraulics import solve
from .model import (
    Device,
    DividingConfig,
    Network,
    Partition,
    boundary_links,
    installed_config,
    natural_sorted,
    open_all,
    open_internal_valves,
)
from .multiscale import MetricsRow, balance_index, partition_metrics


@dataclass(frozen=True)
class InstalledDevices:
    flow_meters: frozenset[str] = frozenset()
    gate_valves: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "flow_meters", frozenset(self.flow_meters))
        object.__setattr__(self, "gate_valves", frozenset(self.gate_valves))
        both = self.flow_meters & self.gate_valves
        if both:
            raise ValueError(f"links carry both a flow meter and a gate valve: {natural_sorted(both)}")

    @classmethod
    def from_network(cls, network: Network) -> "InstalledDevices":
        fm = {lk.id for lk in network.links if lk.device == Device.FLOW_METER}
        gv = {lk.id for lk in network.links if lk.device == Device.GATE_VALVE}
        return cls(frozenset(fm), frozenset(gv))

    @classmethod
    def from_dict(cls, d: Mapping) -> "InstalledDevices":
        return cls(frozenset(d.get("flow_meters", ())), frozenset(d.get("gate_valves", ())))

    def to_dict(self) -> dict:
        return {"flow_meters": natural_sorted(self.flow_meters), "gate_valves": natural_sorted(self.gate_valves)}

    def check(self, network: Network) -> None:
        missing = (self.flow_meters | self.gate_valves) - set(network.link_map)
        if missing:
            raise ValueError(f"installed devices on unknown links: {natural_sorted(missing)}")


@dataclass(frozen=True)
class DssSolution:
    genes: tuple[int, ...]
    devices: dict[str, str]
    metrics: MetricsRow
    reused_flow_meters: int
    new_flow_meters: int
    rank: int
    new_device_cost: float | None = None

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "genes": genes_to_str(self.genes),
            "devices": dict(self.devices),
            "metrics": self.metrics.to_dict(),
            "reused_flow_meters": self.reused_flow_meters,
            "new_flow_meters": self.new_flow_meters,
            "new_device_cost": self.new_device_cost,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DssSolution":
        return cls(
            genes=genes_from_str(d["genes"]),
            devices=dict(d["devices"]),
            metrics=MetricsRow.from_dict(d["metrics"]),
            reused_flow_meters=d["reused_flow_meters"],
            new_flow_meters=d["new_flow_meters"],
            rank=d["rank"],
            new_device_cost=d.get("new_device_cost"),
        )


def _new_cost(devices: Mapping[str, str], installed: InstalledDevices, costs: Mapping[str, float]) -> float:
    total = 0.0
    for lid, dev in devices.items():
        have = installed.flow_meters if dev == Device.FLOW_METER.value else installed.gate_valves
        if lid not in have:
            total += float(costs.get(lid, 0.0))
    return total


def rank_solutions(
    solutions: Iterable[Individual],
    installed: InstalledDevices,
    link_order: Sequence[str],
    *,
    balance: float | None = None,
    costs: Mapping[str, float] | None = None,
) -> list[DssSolution]:
    """Order feasible layouts for the utility.

    Key: most reused flow meters (or cheapest new devices when ``costs`` is
    given), then fewest flow meters, then highest resilience, then genes.
    Duplicate gene vectors are kept once.
    """
    seen = set()
    rows = []
    for ind in solutions:
        if ind.genes in seen:
            continue
        if not ind.feasible:
            raise ValueError("only feasible layouts can be ranked")
        seen.add(ind.genes)
        cfg = DividingConfig.from_genes(link_order, ind.genes)
        devices = {lid: cfg.assignment[lid].value for lid in link_order}
        reused = len(cfg.flow_meters & installed.flow_meters)
        cost = _new_cost(devices, installed, costs) if costs is not None else None
        st = ind.stats
        metrics = MetricsRow(
            name=f"layout {genes_to_str(ind.genes)}",
            n_ec=len(ind.genes),
            n_fm=ind.n_fm,
            n_gv=ind.n_gv,
            balance_index=balance,
            h_min=st.h_min,
            h_mean=st.h_mean,
            h_max=st.h_max,
            resilience_index=ind.fitness,
            n_violating=len(st.violating_nodes),
        )
        first = cost if costs is not None else -reused
        key = (first, ind.n_fm, -ind.fitness, ind.genes)
        rows.append((key, ind, devices, metrics, reused, cost))
    rows.sort(key=lambda r: r[0])
    out = []
    for rank, (_, ind, devices, metrics, reused, cost) in enumerate(rows, start=1):
        out.append(DssSolution(ind.genes, devices, metrics, reused, ind.n_fm - reused, rank, cost))
    return out


@dataclass(frozen=True)
class LayoutReport:
    metrics: MetricsRow
    devices: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.metrics.to_dict(), devices=dict(self.devices))

    @classmethod
    def from_dict(cls, d: Mapping) -> "LayoutReport":
        return cls(MetricsRow.from_dict(d), dict(d.get("devices", {})))


@dataclass(frozen=True)
class Report:
    scenario: dict
    layouts: list[LayoutReport]
    solutions: list[DssSolution]
    generated_at: str | None = None

    def to_dict(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "scenario": self.scenario,
            "layouts": [lay.to_dict() for lay in self.layouts],
            "solutions": [s.to_dict() for s in self.solutions],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Report":
        return cls(
            scenario=dict(d["scenario"]),
            layouts=[LayoutReport.from_dict(x) for x in d["layouts"]],
            solutions=[DssSolution.from_dict(x) for x in d["solutions"]],
            generated_at=d.get("generated_at"),
        )

    def layout(self, name: str) -> LayoutReport:
        for lay in self.layouts:
            if lay.metrics.name == name:
                return lay
        raise KeyError(name)


def sig6(x):
    """Round floats (recursively) to 6 significant digits."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        return float(f"{x:.6g}")
    if isinstance(x, dict):
        return {k: sig6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [sig6(v) for v in x]
    return x


def normalize(report: Report) -> Report:
    """Round every number the way the JSON report stores it."""
    return Report.from_dict(json.loads(json.dumps(sig6(report.to_dict()))))


def simulate_layout(
    network: Network, name: str, partition: Partition | None, config: DividingConfig | None
) -> tuple[MetricsRow, dict[str, str]]:
    """Simulate one layout and return its metrics row and device map.

    No partition means the un-partitioned network (every pipe open).  With a
    partition, gate valves inside districts are opened and the boundary pipes
    carry ``config`` or, when omitted, the devices already in the network.
    """
    if partition is None:
        net, cfg = open_all(network), None
    else:
        net = open_internal_valves(network, partition)
        bset = natural_sorted(boundary_links(network, partition))
        cfg = config if config is not None else installed_config(net, bset)
    try:
        state = solve(net, cfg)
    except HydraulicError as exc:
        raise HydraulicError(f"layout {name!r}: {exc}") from exc
    if not state.converged:
        raise ConvergenceError(f"layout {name!r}: solver did not converge (residual {state.max_residual:.3g} m3/s)")
    row = partition_metrics(net, partition, cfg, state, name=name)
    devices = {k: cfg.assignment[k].value for k in natural_sorted(cfg.assignment)} if cfg else {}
    return row, devices


def build_report(
    scenario: dict,
    network: Network,
    layouts: Sequence[tuple[str, Partition | None, DividingConfig | None]],
    installed: InstalledDevices,
    solutions: Sequence[Individual] = (),
    *,
    dividing_partition: Partition | None = None,
    link_order: Sequence[str] = (),
    costs: Mapping[str, float] | None = None,
    generated_at: str | None = None,
) -> Report:
    rows = [LayoutReport(*simulate_layout(network, name, part, cfg)) for name, part, cfg in layouts]
    ranked = []
    if solutions:
        ib = balance_index(dividing_partition, network) if dividing_partition is not None else None
        ranked = rank_solutions(solutions, installed, link_order, balance=ib, costs=costs)
    return normalize(Report(dict(scenario), rows, ranked, generated_at))
