"""Dynamic district metered areas for water distribution networks."""
from .community import AggregationResult, edge_betweenness, girvan_newman_aggregate
from .dividing import GaParams, Individual, SearchResult, count_configs, evaluate, exhaustive_optimize, ga_optimize, optimize
from .dss import InstalledDevices, Report, build_report, rank_solutions
from .errors import (
    AggregationError,
    ConvergenceError,
    DisconnectedError,
    DynaDmaError,
    HydraulicError,
    InpParseError,
    NetworkValidationError,
    OptimizationError,
    PartitionError,
    SingularSystemError,
)
from .estimators import DividingOptimizer, MultiscaleAggregator
from .hydraulics import HydraulicState, pressure_stats, resilience_index, solve
from .inp import emit_graph, emit_network, emit_partition, emit_report, parse_network, parse_partition, parse_report
from .model import Device, DividingConfig, Link, LinkStatus, Network, Node, NodeKind, Partition, validate
from .multiscale import MsNetwork, balance_index, build_ms_network, optimal_cluster_count, partition_metrics
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "AggregationResult",
    "ConvergenceError",
    "Device",
    "DisconnectedError",
    "DividingConfig",
    "DividingOptimizer",
    "DynaDmaError",
    "GaParams",
    "HydraulicError",
    "HydraulicState",
    "Individual",
    "InpParseError",
    "InstalledDevices",
    "Link",
    "LinkStatus",
    "MsNetwork",
    "MultiscaleAggregator",
    "Network",
    "NetworkValidationError",
    "Node",
    "NodeKind",
    "OptimizationError",
    "Partition",
    "PartitionError",
    "Report",
    "RunConfig",
    "SearchResult",
    "SingularSystemError",
    "balance_index",
    "build_ms_network",
    "build_report",
    "count_configs",
    "edge_betweenness",
    "emit_graph",
    "emit_network",
    "emit_partition",
    "emit_report",
    "evaluate",
    "exhaustive_optimize",
    "ga_optimize",
    "girvan_newman_aggregate",
    "optimal_cluster_count",
    "optimize",
    "parse_network",
    "parse_partition",
    "parse_report",
    "partition_metrics",
    "pressure_stats",
    "rank_solutions",
    "resilience_index",
    "run_pipeline",
    "solve",
    "validate",
]
