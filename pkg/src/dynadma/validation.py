"""Input checks shared by the estimators, the pipeline and the CLI."""
from __future__ import annotations

from typing import Sequence

from .errors import NetworkValidationError, PartitionError
from .model import Network, Partition, bind_partition, disconnected_dmas, validate


def check_network(network) -> Network:
    """Return ``network`` if it satisfies every invariant, raise otherwise."""
    if not isinstance(network, Network):
        raise TypeError(f"expected a Network, got {type(network).__name__}")
    violations = validate(network)
    if violations:
        raise NetworkValidationError(violations)
    return network


def check_partition(network: Network, partition) -> Partition:
    """Bind ``partition`` to ``network`` and check every district is connected.

    Unlabelled reservoirs are assigned to a district on the way.
    """
    if not isinstance(partition, Partition):
        raise TypeError(f"expected a Partition, got {type(partition).__name__}")
    bound = bind_partition(network, partition)
    bad = disconnected_dmas(network, bound)
    if bad:
        raise PartitionError(f"districts are not internally connected: {', '.join(bad)}")
    return bound


def check_genes(genes: Sequence[int], n: int) -> tuple[int, ...]:
    out = tuple(int(g) for g in genes)
    if len(out) != n:
        raise ValueError(f"expected {n} genes, got {len(out)}")
    if any(g not in (0, 1) for g in out):
        raise ValueError("genes must be 0 or 1")
    return out


def check_multiplier(factor: float) -> float:
    factor = float(factor)
    if not factor > 0:
        raise ValueError(f"demand multiplier must be > 0, got {factor}")
    return factor
