"""Estimator-style wrappers around aggregation and dividing.

Both follow the scikit-learn conventions: hyper-parameters in ``__init__``,
learned state in trailing-underscore attributes set by ``fit``, and
``get_params``/``set_params`` inherited from ``BaseEstimator``.  The "X" of
``fit`` is the network and the "y" is its current partition.
"""
from __future__ import annotations

import logging
import secrets

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .community import girvan_newman_aggregate
from .dividing import GaParams, Individual, SearchResult, optimize
from .model import DividingConfig, Network, Partition, open_internal_valves
from .multiscale import build_ms_network, length_weight, optimal_cluster_count
from .validation import check_network, check_partition

logger = logging.getLogger(__name__)


class MultiscaleAggregator(BaseEstimator):
    """Merge existing districts into ``n_clusters`` larger ones.

    Parameters
    ----------
    n_clusters : int or None
        Target district count; ``None`` uses the topological optimum for the
        network size.
    weight : callable
        Link -> hyper-link weight; pipe length by default.
    """

    def __init__(self, n_clusters=None, weight=length_weight):
        self.n_clusters = n_clusters
        self.weight = weight

    def fit(self, network: Network, partition: Partition):
        network = check_network(network)
        partition = check_partition(network, partition)
        c = self.n_clusters if self.n_clusters is not None else optimal_cluster_count(len(network.nodes))
        self.ms_network_ = build_ms_network(network, partition, self.weight)
        self.aggregation_ = girvan_newman_aggregate(self.ms_network_, int(c))
        self.partition_ = self.aggregation_.new_partition
        self.super_labels_ = self.aggregation_.super_labels
        self.boundary_links_ = self.aggregation_.new_boundary_links
        self.n_clusters_ = int(c)
        return self

    def transform(self, partition: Partition | None = None) -> Partition:
        """Relabel ``partition`` (default: the fitted one) with super-districts."""
        check_is_fitted(self, "partition_")
        if partition is None:
            return self.partition_
        return Partition({n: self.super_labels_[d] for n, d in partition.labels.items()})

    def fit_transform(self, network: Network, partition: Partition) -> Partition:
        return self.fit(network, partition).partition_


class DividingOptimizer(BaseEstimator):
    """Place flow meters and gate valves on a partition's boundary pipes.

    ``method`` is ``"ga"``, ``"exhaustive"`` or ``"auto"`` (exhaustive when
    2**n_boundary <= ``exhaustive_cap``).  With ``random_state=None`` a seed
    is drawn, logged and kept in ``seed_``.
    """

    def __init__(
        self,
        population=50,
        generations=100,
        crossover_rate=0.8,
        mutation_rate=0.02,
        elitism=1,
        random_state=None,
        method="ga",
        exhaustive_cap=65536,
    ):
        self.population = population
        self.generations = generations
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.elitism = elitism
        self.random_state = random_state
        self.method = method
        self.exhaustive_cap = exhaustive_cap

    def ga_params(self, seed=None) -> GaParams:
        return GaParams(
            population=self.population,
            generations=self.generations,
            crossover_rate=self.crossover_rate,
            mutation_rate=self.mutation_rate,
            seed=seed,
            elitism=self.elitism,
        )

    def fit(self, network: Network, partition: Partition):
        network = check_network(network)
        partition = check_partition(network, partition)
        seed = self.random_state
        if seed is None:
            seed = secrets.randbits(63)
            logger.info("no random_state given; using seed %d", seed)
        self.seed_ = int(seed)
        self.partition_ = partition
        self.result_: SearchResult = optimize(
            network, partition, self.ga_params(self.seed_), method=self.method, cap=self.exhaustive_cap
        )
        self.link_order_ = self.result_.link_order
        self.solutions_: list[Individual] = self.result_.solutions
        self.best_ = self.result_.best
        self.best_config_ = (
            DividingConfig.from_genes(self.link_order_, self.best_.genes) if self.best_ is not None else None
        )
        return self

    def transform(self, network: Network) -> Network:
        """Install the best layout on ``network``, opening valves left inside merged districts."""
        check_is_fitted(self, "result_")
        if self.best_config_ is None:
            raise ValueError("no feasible layout was found")
        return self.best_config_.apply(open_internal_valves(network, self.partition_))

    def score(self, network=None, partition=None) -> float:
        """Resilience index of the best feasible layout (-inf when none)."""
        check_is_fitted(self, "result_")
        return self.best_.fitness if self.best_ is not None else float("-inf")

