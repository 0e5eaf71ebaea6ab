"""Command-line interface.

Exit codes: 0 success, 1 input/validation error, 2 hydraulic solver failure,
3 no feasible layout.
"""
from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from pathlib import Path

from .community import girvan_newman_aggregate
from .dividing import Evaluator, GaParams, optimize
from .dss import build_report, sig6
from .errors import DynaDmaError, HydraulicError, InpParseError
from .hydraulics import MAX_ITER, solve
from .inp import emit_graph, emit_partition, emit_report, parse_network, parse_partition, parse_report
from .model import Device, DividingConfig, boundary_links, installed_config, natural_sorted, open_all, open_internal_valves, scale_demands, validate
from .multiscale import build_ms_network, optimal_cluster_count, partition_metrics
from .pipeline import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_SOLVER, RunConfig, StageError, load_installed, run_pipeline
from .validation import check_multiplier, check_network, check_partition

logger = logging.getLogger("dynadma")


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _err(msg: str) -> None:
    print(f"dynadma: {msg}", file=sys.stderr)


def _load(args, need_partition=True):
    net = check_network(parse_network(Path(args.network).read_bytes()))
    part = None
    if getattr(args, "partition", None):
        part = check_partition(net, parse_partition(Path(args.partition).read_bytes()))
    elif need_partition:
        raise ValueError("--partition is required")
    return net, part


def _seed(args, ga: dict) -> int:
    seed = args.seed if args.seed is not None else ga.get("seed")
    if seed is None:
        seed = secrets.randbits(63)
        logger.info("no seed given; using %d", seed)
    return int(seed)


def _ga_config(path) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _config_file(path) -> DividingConfig:
    raw = json.loads(Path(path).read_text())
    raw = raw.get("assignment", raw)
    return DividingConfig({k: Device(v) for k, v in raw.items()})


def cmd_validate(args) -> int:
    net = parse_network(Path(args.network).read_bytes())
    problems = [str(v) for v in validate(net)]
    if args.partition and not problems:
        check_partition(net, parse_partition(Path(args.partition).read_bytes()))
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_INPUT
    print(f"ok: {len(net.junctions)} junctions, {len(net.reservoirs)} reservoirs, {len(net.links)} pipes")
    return EXIT_OK


def cmd_simulate(args) -> int:
    net, part = _load(args, need_partition=False)
    net = scale_demands(net, check_multiplier(args.multiplier))
    cfg = _config_file(args.config) if args.config else None
    if part is None:
        sim_net = net if cfg is not None else open_all(net)
    else:
        sim_net = open_internal_valves(net, part)
        if cfg is None:
            cfg = installed_config(sim_net, natural_sorted(boundary_links(net, part)))
    state = solve(sim_net, cfg, max_iter=args.max_iterations)
    if not state.converged:
        _err(
            f"solver did not converge after {state.iterations} iterations: "
            f"continuity residual {state.max_residual:.3g} m3/s, last head change {state.max_head_change:.3g} m"
        )
        return EXIT_SOLVER
    row = partition_metrics(sim_net, part, cfg, state, name=args.name)
    _write(json.dumps(sig6(row.to_dict()), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_ms_build(args) -> int:
    net, part = _load(args)
    ms = build_ms_network(net, part)
    _write(json.dumps(ms.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    if args.dot_out:
        Path(args.dot_out).write_text(emit_graph(net, ms))
    return EXIT_OK


def cmd_aggregate(args) -> int:
    net, part = _load(args)
    c = args.clusters if args.clusters is not None else optimal_cluster_count(len(net.nodes))
    ms = build_ms_network(net, part)
    agg = girvan_newman_aggregate(ms, c)
    csv_text = emit_partition(agg.new_partition)
    summary = {
        "target_clusters": c,
        "super_labels": agg.super_labels,
        "new_boundary_links": natural_sorted(agg.new_boundary_links),
        "removed_hyperlinks": [[lid, b] for lid, b in agg.removed_edges_log],
    }
    if args.out:
        Path(args.out).write_text(csv_text)
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        sys.stdout.write(csv_text)
    if args.dot_out:
        Path(args.dot_out).write_text(emit_graph(net, agg.new_partition))
    return EXIT_OK


def cmd_divide(args) -> int:
    net, part = _load(args)
    ga = _ga_config(args.ga_config)
    params = GaParams.from_dict(dict(ga, seed=_seed(args, ga)))
    scen = scale_demands(net, check_multiplier(args.multiplier))
    installed = load_installed(args.installed, net)
    result = optimize(scen, part, params, method=args.method)
    scenario = {
        "demand_multiplier": args.multiplier,
        "h_star": net.h_star,
        "seed": params.seed,
        "method": args.method,
        "boundary_links": result.link_order,
        "evaluations": result.evaluations,
    }
    if not result.solutions and result.best_infeasible is not None:
        scenario["best_infeasible"] = {
            "genes": "".join(map(str, result.best_infeasible.genes)),
            "reason": result.best_infeasible.reason,
        }
    report = build_report(
        scenario, scen, [], installed, result.solutions, dividing_partition=part, link_order=result.link_order
    )
    _write(emit_report(report), args.out)
    if not result.solutions:
        _err("no feasible layout found")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_report(args) -> int:
    net, part = _load(args)
    scen = scale_demands(net, check_multiplier(args.multiplier))
    installed = load_installed(args.installed, net)
    layouts = [("un-partitioned", None, None), (f"{part.cluster_count} DMAs", part, None)]
    div_part = part
    if args.aggregated:
        div_part = check_partition(net, parse_partition(Path(args.aggregated).read_bytes()))
        layouts.append((f"{div_part.cluster_count} DMAs (aggregated)", div_part, None))
    order = natural_sorted(boundary_links(net, div_part))
    solutions = []
    if args.solutions:
        prior = parse_report(Path(args.solutions).read_bytes())
        ev = Evaluator(scen, div_part)
        solutions = [ev(s.genes) for s in prior.solutions]
        solutions = [s for s in solutions if s.feasible]
    scenario = {"demand_multiplier": args.multiplier, "h_star": net.h_star, "boundary_links": order}
    report = build_report(
        scenario, scen, layouts, installed, solutions, dividing_partition=div_part, link_order=order
    )
    _write(emit_report(report), args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "network": args.network,
        "partition": args.partition,
        "multiplier": args.multiplier,
        "clusters": args.clusters,
        "seed": args.seed,
        "installed": args.installed,
        "method": args.method,
        "out": args.out,
        "dot_out": args.dot_out,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.ga_config:
        base["ga"] = _ga_config(args.ga_config)
    for key in ("network", "partition"):
        if key not in base:
            raise ValueError(f"--{key} is required (flag or config file)")
    cfg = RunConfig.from_dict(base)
    result = run_pipeline(cfg, timestamp=not args.no_timestamp)
    _write(emit_report(result.report), cfg.out)
    if cfg.dot_out:
        out = Path(cfg.dot_out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in result.graphs().items():
            (out / name).write_text(text)
    if result.exit_code == EXIT_INFEASIBLE:
        _err("no feasible dividing layout found")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynadma", description="Dynamic district metered areas for water networks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, partition=True, required_partition=True):
        sp.add_argument("--network", required=True, help="network file (INP subset)")
        if partition:
            sp.add_argument("--partition", required=required_partition, help="node_id,dma CSV")

    sp = sub.add_parser("validate", help="check a network file")
    common(sp, required_partition=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="steady-state simulation and metrics")
    common(sp, required_partition=False)
    sp.add_argument("--config", help="device assignment JSON {link_id: flow_meter|gate_valve}")
    sp.add_argument("--multiplier", type=float, default=1.0)
    sp.add_argument("--max-iterations", type=int, default=MAX_ITER)
    sp.add_argument("--name", default="")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ms-build", help="build the multiscale network")
    common(sp)
    sp.add_argument("--out")
    sp.add_argument("--dot-out")
    sp.set_defaults(func=cmd_ms_build)

    sp = sub.add_parser("aggregate", help="merge districts with Girvan-Newman on the MS network")
    common(sp)
    sp.add_argument("--clusters", type=int)
    sp.add_argument("--out", help="write the new partition CSV here")
    sp.add_argument("--dot-out")
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("divide", help="optimise devices on the boundary pipes")
    common(sp)
    sp.add_argument("--multiplier", type=float, default=1.0)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--ga-config")
    sp.add_argument("--installed")
    sp.add_argument("--method", choices=("ga", "exhaustive", "auto"), default="ga")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_divide)

    sp = sub.add_parser("report", help="assemble a decision report from stage outputs")
    common(sp)
    sp.add_argument("--aggregated", help="aggregated partition CSV")
    sp.add_argument("--solutions", help="report JSON produced by 'divide'")
    sp.add_argument("--multiplier", type=float, default=1.0)
    sp.add_argument("--installed")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("pipeline", help="run every stage")
    sp.add_argument("--config", help="run configuration JSON; flags override it")
    sp.add_argument("--network")
    sp.add_argument("--partition")
    sp.add_argument("--multiplier", type=float)
    sp.add_argument("--clusters", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--installed")
    sp.add_argument("--ga-config")
    sp.add_argument("--method", choices=("ga", "exhaustive", "auto"))
    sp.add_argument("--out")
    sp.add_argument("--dot-out", help="directory for DOT renderings")
    sp.add_argument("--no-timestamp", action="store_true")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        _err(str(exc))
        return EXIT_SOLVER if isinstance(exc.cause, HydraulicError) else EXIT_INPUT
    except HydraulicError as exc:
        _err(str(exc))
        return EXIT_SOLVER
    except InpParseError as exc:
        _err(f"parse error: {exc}")
        return EXIT_INPUT
    except (DynaDmaError, ValueError, OSError, KeyError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
