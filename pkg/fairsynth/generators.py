"""Seeded built-in data sources and random instances for tests, selftest and timing scripts."""

from __future__ import annotations

import numpy as np

from .dataset import DiscreteTable, Role, RoleConfig, table_from_rows
from .errors import ConfigError
from .model_graph import AttributeGraph

CHAIN_SIZES = (3, 4, 2, 5, 3, 4)
CHAIN_COPY_PROBABILITY = 0.7

# P(O = 1 | S, A), indexed [s, a]
PLANTED_OUTCOME_RATES = np.array([[0.10, 0.45], [0.55, 0.90]])
PLANTED_ADMISSIBLE_RATES = np.array([0.3, 0.7])
PLANTED_COPY_PROBABILITY = 0.85
PLANTED_NAMES = ("s", "a", "o", "u", "w")
MIN_ROLE_NODES = 3


def planted_bias_roles() -> RoleConfig:
    """Roles of the planted-bias source: s protected, a admissible, o outcome, u and w unlabeled."""
    return RoleConfig(
        protected=("s",),
        admissible=("a",),
        outcome=("o",),
        privileged={"s": "1"},
        positive_outcome={"o": "1"},
    )


def planted_bias_table(n_rows: int, rng: np.random.Generator) -> DiscreteTable:
    """
    Binary source with a protected-to-outcome bias along two routes.

    s drives the outcome o both through the admissible a and directly. u is a noisy copy of o and w a
    noisy copy of s, so an unconstrained tree happily wires s to o while a fair one has to go through a.
    """
    if n_rows < 0:
        msg = f"Row count must be non-negative, got {n_rows}"
        raise ConfigError(msg)
    s = rng.random(n_rows) < 0.5  # noqa: PLR2004
    a = rng.random(n_rows) < PLANTED_ADMISSIBLE_RATES[s.astype(int)]
    o = rng.random(n_rows) < PLANTED_OUTCOME_RATES[s.astype(int), a.astype(int)]
    u = np.where(rng.random(n_rows) < PLANTED_COPY_PROBABILITY, o, ~o)
    w = np.where(rng.random(n_rows) < PLANTED_COPY_PROBABILITY, s, ~s)
    rows = np.column_stack([s, a, o, u, w]).astype(np.int64)
    roles = planted_bias_roles().as_mapping()
    return table_from_rows(rows, dict.fromkeys(PLANTED_NAMES, 2), roles)


def chain_source_table(
    n_rows: int,
    rng: np.random.Generator,
    roles: dict[str, Role] | None = None,
) -> DiscreteTable:
    """Six attributes on a chain; each copies its predecessor modulo its own size with probability 0.7."""
    if n_rows < 0:
        msg = f"Row count must be non-negative, got {n_rows}"
        raise ConfigError(msg)
    data = np.zeros((n_rows, len(CHAIN_SIZES)), dtype=np.int64)
    data[:, 0] = rng.integers(0, CHAIN_SIZES[0], size=n_rows)
    for i in range(1, len(CHAIN_SIZES)):
        size = CHAIN_SIZES[i]
        copied = data[:, i - 1] % size
        fresh = rng.integers(0, size, size=n_rows)
        data[:, i] = np.where(rng.random(n_rows) < CHAIN_COPY_PROBABILITY, copied, fresh)
    sizes = {f"c{i}": size for i, size in enumerate(CHAIN_SIZES)}
    return table_from_rows(data, sizes, roles)


def random_roles(n_nodes: int, rng: np.random.Generator, *, saturated: bool = False) -> list[Role]:
    """Random non-empty, pairwise disjoint protected/admissible/outcome sets; saturated labels every node."""
    if n_nodes < MIN_ROLE_NODES:
        msg = f"Need at least {MIN_ROLE_NODES} attributes for three non-empty role sets, got {n_nodes}"
        raise ConfigError(msg)
    labeled = n_nodes if saturated else int(rng.integers(MIN_ROLE_NODES, n_nodes + 1))
    n_protected = int(rng.integers(1, labeled - 1))
    n_admissible = int(rng.integers(1, labeled - n_protected))
    n_outcome = labeled - n_protected - n_admissible
    assigned = (
        [Role.PROTECTED] * n_protected
        + [Role.ADMISSIBLE] * n_admissible
        + [Role.OUTCOME] * n_outcome
        + [Role.UNLABELED] * (n_nodes - labeled)
    )
    order = rng.permutation(n_nodes)
    roles = [Role.UNLABELED] * n_nodes
    for position, node in enumerate(order):
        roles[int(node)] = assigned[position]
    return roles


def random_graph(
    n_nodes: int,
    rng: np.random.Generator,
    *,
    saturated: bool = False,
    max_weight: int = 10,
) -> AttributeGraph:
    """Complete graph with integer weights in [0, max_weight] and random roles; nodes are named a0, a1, ..."""
    upper = np.triu(rng.integers(0, max_weight + 1, size=(n_nodes, n_nodes)), k=1).astype(np.float64)
    names = tuple(f"a{i}" for i in range(n_nodes))
    roles = tuple(random_roles(n_nodes, rng, saturated=saturated))
    return AttributeGraph(names, roles, upper + upper.T)


def uniform_graph(n_nodes: int, roles: list[Role], weight: float = 1.0) -> AttributeGraph:
    """Complete graph with one weight everywhere, the worst case for best-first search."""
    weights = np.full((n_nodes, n_nodes), weight)
    np.fill_diagonal(weights, 0.0)
    return AttributeGraph(tuple(f"a{i}" for i in range(n_nodes)), tuple(roles), weights)
