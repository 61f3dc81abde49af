"""
Attribute dependency graphs, spanning trees and the fair-tree structural checks.

A tree is fair when every path between a protected and an outcome attribute passes through an
admissible attribute. For trees this undirected criterion is the same as asking it of every directed
path under every orientation of the edges; `fair_under_all_orientations` checks the directed form
explicitly so the two can be compared.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from .dataset import Role
from .errors import ConfigError, GuardTrippedError
from .utils import get_data_dir

logger = logging.getLogger(__name__)

Edge = tuple[int, int]

GRAPH_SCHEMA_VERSION = 1
DEFAULT_SUPPORT_GUARD = 64
ORIENTATION_GUARD = 12
WEIGHT_TOLERANCE = 1e-9


def edge(i: int, j: int) -> Edge:
    """Unordered pair in canonical (smaller, larger) form."""
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class AttributeGraph:
    """Complete weighted graph over attributes; absent pairs carry weight 0."""

    names: tuple[str, ...]
    roles: tuple[Role, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.names)
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if len(self.roles) != n or weights.shape != (n, n):
            msg = f"Graph over {n} attributes needs {n} roles and an {n}x{n} weight matrix"
            raise ConfigError(msg)
        np.fill_diagonal(weights, 0.0)
        if not np.allclose(weights, weights.T, rtol=0.0, atol=0.0):
            msg = "Edge weights must be symmetric"
            raise ConfigError(msg)
        if (weights < 0).any():
            msg = "Edge weights must be non-negative"
            raise ConfigError(msg)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(
        cls,
        names: Sequence[str],
        roles: Sequence[Role],
        weighted_edges: Mapping[tuple[int, int], float],
    ) -> AttributeGraph:
        n = len(names)
        weights = np.zeros((n, n))
        for (i, j), w in weighted_edges.items():
            if i == j:
                msg = f"Self loop on attribute {names[i]!r}"
                raise ConfigError(msg)
            weights[i, j] = weights[j, i] = w
        return cls(tuple(names), tuple(roles), weights)

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def weight(self, i: int, j: int) -> float:
        return float(self.weights[i, j])

    def pairs(self) -> list[Edge]:
        """Every unordered pair, lexicographic."""
        return list(itertools.combinations(range(self.n_nodes), 2))

    def support(self) -> list[Edge]:
        """Pairs with positive weight."""
        return [e for e in self.pairs() if self.weights[e] > 0]

    def with_roles(self, roles: Sequence[Role]) -> AttributeGraph:
        return AttributeGraph(self.names, tuple(roles), self.weights)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as e:
            msg = f"Unknown attribute {name!r}"
            raise ConfigError(msg) from e

    def to_dict(self) -> dict[str, object]:
        return {
            "schema_version": GRAPH_SCHEMA_VERSION,
            "nodes": [{"name": n, "role": r.value} for n, r in zip(self.names, self.roles, strict=True)],
            "edges": [
                {"source": self.names[i], "target": self.names[j], "weight": self.weight(i, j)}
                for i, j in self.support()
            ],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> AttributeGraph:
        try:
            nodes = raw["nodes"]
            names = [node["name"] for node in nodes]  # type: ignore[attr-defined, index]
            roles = [Role(node.get("role", Role.UNLABELED)) for node in nodes]  # type: ignore[attr-defined]
            index = {name: i for i, name in enumerate(names)}
            weighted = {
                (index[e["source"]], index[e["target"]]): float(e["weight"])
                for e in raw.get("edges", [])  # type: ignore[attr-defined]
            }
        except (KeyError, TypeError, ValueError) as e:
            msg = f"Malformed graph description: {e}"
            raise ConfigError(msg) from e
        return cls.from_edges(names, roles, weighted)

    @classmethod
    def from_json(cls, path: Path | str) -> AttributeGraph:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            msg = f"Cannot read graph file {path}: {e}"
            raise ConfigError(msg) from e
        return cls.from_dict(raw)

    def to_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def load_toy_graph() -> AttributeGraph:
    """The bundled five-attribute worked example (age, sex, relation, education, income)."""
    return AttributeGraph.from_json(get_data_dir() / "adult_toy_graph.json")


@dataclass(frozen=True)
class SpanningTree:
    """
    |A| - 1 edges connecting every attribute, no cycles.

    Edge weights are whatever the tree was scored with: graph weights, exact scores or noisy
    measurements (which may be negative). A tree selected privately without released scores carries
    zeros.
    """

    n_nodes: int
    edges: tuple[Edge, ...]
    edge_weights: tuple[float, ...]

    @classmethod
    def from_edges(
        cls,
        weights: np.ndarray | None,
        edges: Iterable[tuple[int, int]],
        n_nodes: int = 0,
    ) -> SpanningTree:
        canonical = tuple(sorted(edge(i, j) for i, j in edges))
        if weights is not None:
            n_nodes = int(weights.shape[0])
        check_spanning(n_nodes, canonical)
        scored = tuple(float(weights[e]) if weights is not None else 0.0 for e in canonical)
        return cls(n_nodes, canonical, scored)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.edge_weights)

    def neighbors(self) -> list[set[int]]:
        return adjacency(self.n_nodes, self.edges)

    def rescored(self, weights: np.ndarray) -> SpanningTree:
        """Same edges, weighted by another matrix."""
        return SpanningTree.from_edges(weights, self.edges)

    def to_dict(self, names: Sequence[str], roles: Sequence[Role]) -> dict[str, object]:
        return {
            "schema_version": GRAPH_SCHEMA_VERSION,
            "nodes": [{"name": n, "role": r.value} for n, r in zip(names, roles, strict=True)],
            "edges": [
                {"source": names[i], "target": names[j], "weight": w}
                for (i, j), w in zip(self.edges, self.edge_weights, strict=True)
            ],
            "total_weight": self.total_weight,
            "fair": is_fair_tree(self, roles),
        }


@dataclass(frozen=True)
class PartialTree:
    """Acyclic edge set, possibly disconnected, with the priority key it was queued under."""

    n_nodes: int
    edges: frozenset[Edge] = frozenset()
    key: float = 0.0
    components: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.components:
            object.__setattr__(self, "components", tuple(range(self.n_nodes)))

    @property
    def is_spanning(self) -> bool:
        return len(self.edges) == self.n_nodes - 1

    def joins_components(self, i: int, j: int) -> bool:
        return self.components[i] != self.components[j]

    def add(self, e: Edge, cost: float) -> PartialTree:
        """Return the forest with one more edge; the edge must join two components."""
        old, new = self.components[e[1]], self.components[e[0]]
        components = tuple(new if c == old else c for c in self.components)
        return PartialTree(self.n_nodes, self.edges | {e}, self.key + cost, components)


def adjacency(n_nodes: int, edges: Iterable[Edge]) -> list[set[int]]:
    neighbors: list[set[int]] = [set() for _ in range(n_nodes)]
    for i, j in edges:
        neighbors[i].add(j)
        neighbors[j].add(i)
    return neighbors


def check_spanning(n_nodes: int, edges: Sequence[Edge]) -> None:
    """Raise unless the edges form a spanning tree, checked with union-find."""
    if len(edges) != max(n_nodes - 1, 0):
        msg = f"A spanning tree over {n_nodes} attributes has {n_nodes - 1} edges, got {len(edges)}"
        raise ConfigError(msg)
    components = UnionFind(range(n_nodes))
    for i, j in edges:
        if not (0 <= i < n_nodes and 0 <= j < n_nodes) or i == j:
            msg = f"Edge {(i, j)} is not a pair of distinct attributes"
            raise ConfigError(msg)
        if components[i] == components[j]:
            msg = f"Edge {(i, j)} closes a cycle"
            raise ConfigError(msg)
        components.union(i, j)


def exposed_roles(neighbors: Sequence[set[int]], start: int, roles: Sequence[Role]) -> tuple[bool, bool]:
    """
    Which of protected / outcome can be reached from start without passing an admissible node.

    The start node counts as reached unless it is admissible itself, in which case any path through it
    is blocked.
    """
    if roles[start] is Role.ADMISSIBLE:
        return False, False
    seen = {start}
    queue = deque([start])
    has_protected = has_outcome = False
    while queue:
        node = queue.popleft()
        has_protected |= roles[node] is Role.PROTECTED
        has_outcome |= roles[node] is Role.OUTCOME
        for nxt in neighbors[node]:
            if nxt not in seen and roles[nxt] is not Role.ADMISSIBLE:
                seen.add(nxt)
                queue.append(nxt)
    return has_protected, has_outcome


def creates_unblocked_path(neighbors: Sequence[set[int]], i: int, j: int, roles: Sequence[Role]) -> bool:
    """Would adding edge (i, j) between two components open an unblocked protected-outcome path."""
    p_i, o_i = exposed_roles(neighbors, i, roles)
    p_j, o_j = exposed_roles(neighbors, j, roles)
    return (p_i and o_j) or (o_i and p_j)


def has_unblocked_path(
    forest: PartialTree | SpanningTree,
    source: int,
    target: int,
    roles: Sequence[Role],
) -> bool:
    """True iff the forest connects the nodes by a path with no admissible node strictly inside it."""
    neighbors = adjacency(forest.n_nodes, forest.edges)
    if source == target:
        return True
    seen = {source}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nxt in neighbors[node]:
            if nxt == target:
                return True
            if nxt not in seen and roles[nxt] is not Role.ADMISSIBLE:
                seen.add(nxt)
                queue.append(nxt)
    return False


def _tree_graph(tree: SpanningTree) -> nx.Graph:
    check_spanning(tree.n_nodes, tree.edges)
    g = nx.Graph()
    g.add_nodes_from(range(tree.n_nodes))
    g.add_edges_from(tree.edges)
    return g


def is_fair_tree(tree: SpanningTree, roles: Sequence[Role]) -> bool:
    """Every protected-to-outcome tree path contains an admissible node."""
    g = _tree_graph(tree)
    protected = [i for i, r in enumerate(roles) if r is Role.PROTECTED]
    outcomes = [i for i, r in enumerate(roles) if r is Role.OUTCOME]
    for p, o in itertools.product(protected, outcomes):
        path = nx.shortest_path(g, p, o)
        if not any(roles[x] is Role.ADMISSIBLE for x in path[1:-1]):
            return False
    return True


def neighbor_restriction_check(tree: SpanningTree, roles: Sequence[Role]) -> bool:
    """Every neighbour of an outcome node is admissible or an outcome."""
    neighbors = tree.neighbors()
    allowed = {Role.ADMISSIBLE, Role.OUTCOME}
    return all(roles[x] in allowed for o, r in enumerate(roles) if r is Role.OUTCOME for x in neighbors[o])


def fair_under_all_orientations(tree: SpanningTree, roles: Sequence[Role]) -> bool:
    """Directed form of the criterion: under every orientation, every directed path between a protected
    and an outcome node goes through an admissible node."""
    if len(tree.edges) > ORIENTATION_GUARD:
        msg = f"Orientation enumeration is limited to {ORIENTATION_GUARD} edges, got {len(tree.edges)}"
        raise GuardTrippedError(msg)
    check_spanning(tree.n_nodes, tree.edges)
    protected = [i for i, r in enumerate(roles) if r is Role.PROTECTED]
    outcomes = [i for i, r in enumerate(roles) if r is Role.OUTCOME]
    endpoints = [(p, o) for p in protected for o in outcomes] + [(o, p) for p in protected for o in outcomes]
    for flips in itertools.product((False, True), repeat=len(tree.edges)):
        directed = nx.DiGraph()
        directed.add_nodes_from(range(tree.n_nodes))
        directed.add_edges_from((j, i) if flip else (i, j) for (i, j), flip in zip(tree.edges, flips, strict=True))
        for source, target in endpoints:
            if nx.has_path(directed, source, target):
                path = nx.shortest_path(directed, source, target)
                if not any(roles[x] is Role.ADMISSIBLE for x in path[1:-1]):
                    return False
    return True


def kruskal_maximum_spanning_tree(graph: AttributeGraph, allowed: Iterable[Edge] | None = None) -> SpanningTree:
    """Classical maximum spanning tree over the complete graph (or the allowed pairs) via networkx Kruskal."""
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_nodes))
    pairs = graph.pairs() if allowed is None else sorted(edge(*e) for e in allowed)
    g.add_weighted_edges_from((i, j, graph.weight(i, j)) for i, j in pairs)
    mst = nx.maximum_spanning_tree(g, algorithm="kruskal")
    if mst.number_of_edges() != graph.n_nodes - 1:
        msg = "The allowed pairs do not connect every attribute"
        raise ConfigError(msg)
    return SpanningTree.from_edges(graph.weights, mst.edges())


def complete_fair_forest(
    graph: AttributeGraph,
    edges: Iterable[Edge],
    *,
    zero_weight_only: bool = False,
) -> SpanningTree | None:
    """
    Extend a fair forest to a fair spanning tree, joining components lexicographically.

    A component holding an admissible node can always be joined through it, so this only fails when
    no attribute is admissible and protected and outcome attributes sit in different components.
    """
    chosen = sorted(edge(*e) for e in edges)
    neighbors = adjacency(graph.n_nodes, chosen)
    components = UnionFind(range(graph.n_nodes))
    for i, j in chosen:
        components.union(i, j)
    for i, j in graph.pairs():
        if len(chosen) == graph.n_nodes - 1:
            break
        if components[i] == components[j] or (zero_weight_only and graph.weights[i, j] != 0):
            continue
        if creates_unblocked_path(neighbors, i, j, graph.roles):
            continue
        chosen.append((i, j))
        neighbors[i].add(j)
        neighbors[j].add(i)
        components.union(i, j)
    if len(chosen) != max(graph.n_nodes - 1, 0):
        return None
    return SpanningTree.from_edges(graph.weights, chosen)


class _FairForestSearch:
    """Branch and bound over fair forests of the positive-weight support."""

    def __init__(self, graph: AttributeGraph, support: list[Edge]) -> None:
        self.graph = graph
        self.support = support
        self.weights = [graph.weight(*e) for e in support]
        self.roles = graph.roles
        self.neighbors: list[set[int]] = [set() for _ in range(graph.n_nodes)]
        self.components = list(range(graph.n_nodes))
        self.chosen: list[Edge] = []
        self.best_weight = -1.0
        self.best_edges: list[Edge] = []
        self.visited = 0

    def _bound(self, start: int) -> float:
        """
        Heaviest forest the remaining edges could add.

        Fairness only gets harder as edges are added, so an edge that would open an unblocked path now
        can never be added below this node and is left out of the bound.
        """
        exposure: dict[int, tuple[bool, bool]] = {}

        def exposed(node: int) -> tuple[bool, bool]:
            if node not in exposure:
                exposure[node] = exposed_roles(self.neighbors, node, self.roles)
            return exposure[node]

        remaining = UnionFind()
        total = 0.0
        for k in range(start, len(self.support)):
            i, j = self.support[k]
            a, b = self.components[i], self.components[j]
            if a == b or remaining[a] == remaining[b]:
                continue
            (p_i, o_i), (p_j, o_j) = exposed(i), exposed(j)
            if (p_i and o_j) or (o_i and p_j):
                continue
            remaining.union(a, b)
            total += self.weights[k]
        return total

    def run(self, k: int, weight: float) -> None:
        self.visited += 1
        if weight > self.best_weight:
            self.best_weight = weight
            self.best_edges = list(self.chosen)
        if k == len(self.support) or len(self.chosen) == self.graph.n_nodes - 1:
            return
        if weight + self._bound(k) <= self.best_weight:
            return
        i, j = self.support[k]
        if self.components[i] != self.components[j] and not creates_unblocked_path(self.neighbors, i, j, self.roles):
            saved = list(self.components)
            old, new = self.components[j], self.components[i]
            self.components = [new if c == old else c for c in self.components]
            self.neighbors[i].add(j)
            self.neighbors[j].add(i)
            self.chosen.append((i, j))
            self.run(k + 1, weight + self.weights[k])
            self.chosen.pop()
            self.neighbors[i].discard(j)
            self.neighbors[j].discard(i)
            self.components = saved
        self.run(k + 1, weight)


def brute_force_optimal_fair_tree(
    graph: AttributeGraph,
    *,
    max_support_edges: int = DEFAULT_SUPPORT_GUARD,
) -> SpanningTree | None:
    """
    Exact maximum-weight fair spanning tree, for use as a test oracle.

    Enumerates forests of the positive-weight pairs by including or excluding each pair in descending
    weight order, pruning cycles, unfair partial forests and branches whose Kruskal bound cannot beat
    the best forest found. The best forest is then completed with zero-weight pairs. Among equally heavy
    trees the first one reached in that order is returned.
    """
    support = sorted(graph.support(), key=lambda e: (-graph.weight(*e), e))
    if len(support) > max_support_edges:
        msg = (
            f"Exhaustive fair-tree search is limited to {max_support_edges} positive-weight pairs, "
            f"got {len(support)}"
        )
        raise GuardTrippedError(msg)
    search = _FairForestSearch(graph, support)
    search.run(0, 0.0)
    logger.debug("Fair forest search visited %d nodes, best weight %s", search.visited, search.best_weight)
    return complete_fair_forest(graph, search.best_edges)
