"""End-to-end dynamic-district workflow.

parse -> validate -> baseline -> MS network -> aggregate -> re-simulate with
merged districts opened -> (if pressure is still short) dividing search ->
ranking -> report.
"""
from __future__ import annotations

import json
import logging
import secrets
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

from .community import AggregationResult, girvan_newman_aggregate
from .dividing import GaParams, SearchResult, optimize
from .dss import InstalledDevices, Report, build_report, rank_solutions, simulate_layout
from .errors import DynaDmaError
from .inp import emit_graph, parse_network, parse_partition
from .model import DividingConfig, Network, Partition, boundary_links, natural_sorted, scale_demands
from .multiscale import MsNetwork, build_ms_network, optimal_cluster_count
from .validation import check_multiplier, check_network, check_partition

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_INFEASIBLE = 0, 1, 2, 3


class StageError(DynaDmaError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class RunConfig:
    network: str
    partition: str
    multiplier: float = 1.0
    clusters: int | None = None
    seed: int | None = None
    ga: dict = field(default_factory=dict)
    installed: str | None = None
    costs: str | None = None
    method: str = "ga"
    out: str | None = None
    dot_out: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run-config keys: {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> "RunConfig":
        check_multiplier(self.multiplier)
        for p in (self.network, self.partition, self.installed, self.costs):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"no such file: {p}")
        if self.clusters is not None and self.clusters < 1:
            raise ValueError("clusters must be >= 1")
        return self


@dataclass
class PipelineResult:
    report: Report
    exit_code: int
    ms_network: MsNetwork
    aggregation: AggregationResult
    search: SearchResult | None
    network: Network
    partition: Partition

    def graphs(self) -> dict[str, str]:
        """DOT renderings of the original layout, the MS network and the merged layout."""
        return {
            "original.dot": emit_graph(self.network, self.partition),
            "ms_network.dot": emit_graph(self.network, self.ms_network),
            "aggregated.dot": emit_graph(self.network, self.aggregation.new_partition),
        }


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (DynaDmaError, ValueError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


def load_inputs(network_path, partition_path) -> tuple[Network, Partition]:
    net = _stage("parse", lambda: parse_network(Path(network_path).read_bytes()))
    net = _stage("validate", check_network, net)
    part = _stage("parse", lambda: parse_partition(Path(partition_path).read_bytes()))
    part = _stage("validate", check_partition, net, part)
    return net, part


def load_installed(path, network: Network) -> InstalledDevices:
    if path is None:
        return InstalledDevices.from_network(network)
    inst = InstalledDevices.from_dict(json.loads(Path(path).read_text()))
    inst.check(network)
    return inst


def run_pipeline(cfg: RunConfig, timestamp: bool = True) -> PipelineResult:
    cfg = _stage("config", cfg.validate)
    net, part = load_inputs(cfg.network, cfg.partition)
    installed = _stage("config", load_installed, cfg.installed, net)
    costs = _stage("config", lambda: json.loads(Path(cfg.costs).read_text())) if cfg.costs else None
    seed = cfg.seed if cfg.seed is not None else cfg.ga.get("seed")
    if seed is None:
        seed = secrets.randbits(63)
        logger.info("no seed given; using %d", seed)
    ga_cfg = dict(cfg.ga, seed=int(seed))
    params = _stage("config", GaParams.from_dict, ga_cfg)

    scenario_net = _stage("scale", scale_demands, net, cfg.multiplier)
    n_dma = part.cluster_count
    target = cfg.clusters if cfg.clusters is not None else optimal_cluster_count(len(net.nodes))

    ms = _stage("ms-build", build_ms_network, net, part)
    agg = _stage("aggregate", girvan_newman_aggregate, ms, target)
    new_part = agg.new_partition

    base_name = f"{n_dma} DMAs"
    agg_name = f"{target} DMAs (aggregated)"
    layouts = [("un-partitioned", None, None), (base_name, part, None), (agg_name, new_part, None)]
    row, _ = _stage("simulate", simulate_layout, scenario_net, agg_name, new_part, None)

    order = natural_sorted(boundary_links(net, new_part))
    search = None
    solutions = []
    notes = []
    ga_skipped = row.h_min >= net.h_star
    if ga_skipped:
        notes.append("aggregated layout meets the minimum pressure; dividing search skipped")
    elif not order:
        notes.append("aggregated layout has no boundary links; nothing to divide")
    else:
        search = _stage("divide", optimize, scenario_net, new_part, params, method=cfg.method)
        solutions = search.solutions
        layouts.append((f"{target} DMAs (virtual partitioning)", new_part, DividingConfig.all_flow_meters(order)))
        if solutions:
            ranked = rank_solutions(solutions, installed, order, costs=costs)
            top = DividingConfig.from_genes(order, ranked[0].genes)
            layouts.append((f"{target} DMAs (dividing)", new_part, top))
        else:
            worst = search.best_infeasible
            notes.append(f"no feasible layout found; closest: {worst.reason if worst else 'n/a'}")

    scenario = {
        "demand_multiplier": cfg.multiplier,
        "h_star": net.h_star,
        "n_nodes": len(net.nodes),
        "n_links": len(net.links),
        "initial_clusters": n_dma,
        "target_clusters": target,
        "seed": int(seed),
        "method": cfg.method,
        "ga": {k: v for k, v in asdict(params).items() if k != "seed"},
        "ga_skipped": ga_skipped,
        "original_boundary_links": natural_sorted(boundary_links(net, part)),
        "boundary_links": order,
        "super_labels": dict(agg.super_labels),
        "removed_hyperlinks": [lid for lid, _ in agg.removed_edges_log],
        "installed": installed.to_dict(),
        "evaluations": search.evaluations if search else 0,
        "notes": notes,
    }
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if timestamp else None
    report = _stage(
        "report",
        build_report,
        scenario,
        scenario_net,
        layouts,
        installed,
        solutions,
        dividing_partition=new_part,
        link_order=order,
        costs=costs,
        generated_at=stamp,
    )
    code = EXIT_INFEASIBLE if (search is not None and not solutions) else EXIT_OK
    return PipelineResult(report, code, ms, agg, search, net, part)

