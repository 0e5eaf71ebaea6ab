"""Flow-meter / gate-valve placement on boundary pipes.

A layout is a bit vector over the boundary links in natural id order: 1 puts
a flow meter on the pipe (open), 0 a gate valve (closed).  Layouts are scored
by the resilience index and are feasible only when the network stays
connected, the solver converges and every junction keeps at least ``h_star``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import HydraulicError, OptimizationError
from .hydraulics import PressureStats, pressure_stats, resilience_index, solve
from .model import DividingConfig, Network, Partition, boundary_links, check_connectivity, natural_sorted, open_internal_valves

logger = logging.getLogger(__name__)

Genes = tuple[int, ...]


def count_configs(n_ec: int, n_fm: int) -> int:
    """Number of ways to place ``n_fm`` flow meters on ``n_ec`` boundary pipes."""
    if not 0 <= n_fm <= n_ec:
        raise ValueError(f"need 0 <= n_fm <= n_ec, got n_fm={n_fm}, n_ec={n_ec}")
    return math.comb(n_ec, n_fm)


@dataclass(frozen=True)
class GaParams:
    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float = 0.02
    seed: int | None = None
    elitism: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must be between 0 and the population size")

    @classmethod
    def from_dict(cls, d: dict) -> "GaParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown GA parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Individual:
    genes: Genes
    feasible: bool
    fitness: float | None = None  # resilience index, when computable
    stats: PressureStats | None = None
    reason: str = ""

    @property
    def n_fm(self) -> int:
        return sum(self.genes)

    @property
    def n_gv(self) -> int:
        return len(self.genes) - self.n_fm

    def shortfall(self, h_star: float) -> float:
        if self.stats is None:
            return math.inf
        return max(0.0, h_star - self.stats.h_min)


def gene_order(network: Network, partition: Partition) -> list[str]:
    """Canonical boundary-link order used to index genes."""
    return natural_sorted(boundary_links(network, partition))


class Evaluator:
    """Scores gene vectors for one (network, partition) pair, with memoisation.

    Gate valves left inside a district by ``partition`` are opened first, so
    an aggregated partition can be scored against the original network.
    """

    def __init__(self, network: Network, partition: Partition, convention: str = "total"):
        self.network = open_internal_valves(network, partition)
        self.partition = partition
        self.links = gene_order(network, partition)
        self.convention = convention
        self.cache: dict[Genes, Individual] = {}

    def config(self, genes: Sequence[int]) -> DividingConfig:
        return DividingConfig.from_genes(self.links, genes)

    def __call__(self, genes: Sequence[int]) -> Individual:
        key = tuple(int(g) for g in genes)
        if len(key) != len(self.links):
            raise ValueError(f"{len(key)} genes for {len(self.links)} boundary links")
        hit = self.cache.get(key)
        if hit is None:
            hit = self.cache[key] = self._evaluate(key)
        return hit

    def _evaluate(self, genes: Genes) -> Individual:
        cfg = self.config(genes)
        stranded = check_connectivity(self.network, cfg)
        if stranded:
            return Individual(genes, False, reason=f"disconnected junctions: {', '.join(stranded[:5])}")
        try:
            state = solve(self.network, cfg)
        except HydraulicError as exc:
            return Individual(genes, False, reason=str(exc))
        if not state.converged:
            return Individual(genes, False, reason="hydraulic solver did not converge")
        stats = pressure_stats(self.network, state)
        try:
            ir = resilience_index(self.network, state, self.convention)
        except HydraulicError as exc:
            return Individual(genes, False, stats=stats, reason=str(exc))
        ok = stats.h_min >= self.network.h_star
        reason = "" if ok else f"minimum pressure {stats.h_min:.3f} m below {self.network.h_star} m"
        return Individual(genes, ok, ir, stats, reason)

    def rank_key(self, ind: Individual):
        """Feasible first by resilience (desc), then fewer meters, then genes.

        Infeasible layouts follow, ordered by pressure shortfall.
        """
        if ind.feasible:
            return (0, -ind.fitness, ind.n_fm, ind.genes)
        return (1, ind.shortfall(self.network.h_star), ind.n_fm, ind.genes)


def evaluate(network: Network, partition: Partition, genes: Sequence[int]) -> Individual:
    return Evaluator(network, partition)(genes)


@dataclass
class SearchResult:
    """Ranked feasible layouts plus diagnostics of the search."""

    solutions: list[Individual]
    link_order: list[str]
    evaluations: int
    best_infeasible: Individual | None = None
    seed: int | None = None
    method: str = "ga"
    history: list[float] = field(default_factory=list)

    @property
    def best(self) -> Individual | None:
        return self.solutions[0] if self.solutions else None


def _finish(ev: Evaluator, method: str, seed=None, history=None) -> SearchResult:
    everything = sorted(ev.cache.values(), key=ev.rank_key)
    feasible = [i for i in everything if i.feasible]
    infeasible = [i for i in everything if not i.feasible]
    best_bad = infeasible[0] if infeasible else None
    if not feasible:
        logger.warning(
            "no feasible layout among %d evaluated; closest: %s",
            len(everything),
            best_bad.reason if best_bad else "n/a",
        )
    return SearchResult(feasible, ev.links, len(ev.cache), best_bad, seed, method, history or [])


def exhaustive_optimize(network: Network, partition: Partition, cap: int = 65536, convention: str = "total") -> SearchResult:
    ev = Evaluator(network, partition, convention)
    n = len(ev.links)
    if 2**n > cap:
        raise OptimizationError(f"2^{n} layouts exceed the exhaustive cap of {cap}")
    for genes in itertools.product((0, 1), repeat=n):
        ev(genes)
    return _finish(ev, "exhaustive")


def ga_optimize(
    network: Network,
    partition: Partition,
    params: GaParams = GaParams(),
    convention: str = "total",
    evaluator: Evaluator | None = None,
) -> SearchResult:
    """Generational GA over boundary device layouts.

    Binary tournaments, uniform crossover, per-bit mutation and elitism.
    Every distinct feasible layout met during the run is returned, ranked.
    """
    ev = evaluator or Evaluator(network, partition, convention)
    n = len(ev.links)
    if n < 1:
        raise OptimizationError("the partition has no boundary links to place devices on")
    seed = params.seed
    rng = np.random.default_rng(seed)
    size = params.population

    pop = [tuple(int(b) for b in row) for row in rng.integers(0, 2, size=(size, n))]
    history = []

    def tournament(ranked_keys):
        i, j = rng.integers(0, size, 2)
        return pop[i] if ranked_keys[i] <= ranked_keys[j] else pop[j]

    for _ in range(params.generations):
        keys = [ev.rank_key(ev(g)) for g in pop]
        order = sorted(range(size), key=lambda k: keys[k])
        best = ev(pop[order[0]])
        history.append(best.fitness if best.feasible else -math.inf)
        nxt = [pop[k] for k in order[: params.elitism]]
        while len(nxt) < size:
            p1 = np.array(tournament(keys))
            p2 = np.array(tournament(keys))
            if rng.random() < params.crossover_rate:
                mask = rng.random(n) < 0.5
                c1, c2 = np.where(mask, p1, p2), np.where(mask, p2, p1)
            else:
                c1, c2 = p1.copy(), p2.copy()
            for child in (c1, c2):
                flip = rng.random(n) < params.mutation_rate
                child = np.where(flip, 1 - child, child)
                if len(nxt) < size:
                    nxt.append(tuple(int(b) for b in child))
        pop = nxt
    for g in pop:
        ev(g)
    return _finish(ev, "ga", seed, history)


def optimize(network: Network, partition: Partition, params: GaParams = GaParams(), method: str = "ga", cap: int = 65536) -> SearchResult:
    """Dispatch to the GA, the exhaustive search, or ``"auto"`` (exhaustive when small)."""
    if method == "auto":
        method = "exhaustive" if 2 ** len(gene_order(network, partition)) <= cap else "ga"
    if method == "exhaustive":
        return exhaustive_optimize(network, partition, cap)
    if method == "ga":
        return ga_optimize(network, partition, params)
    raise ValueError(f"unknown method {method!r}")


def genes_to_str(genes: Iterable[int]) -> str:
    return "".join(str(int(g)) for g in genes)


def genes_from_str(s: str) -> Genes:
    if any(c not in "01" for c in s):
        raise ValueError(f"genes must be a 0/1 string, got {s!r}")
    return tuple(int(c) for c in s)
