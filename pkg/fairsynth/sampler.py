"""
Tree model measurement and ancestral sampling.

The tree is oriented away from the lowest-index attribute; the root is drawn from its one-way
distribution and every other attribute from its conditional given the parent, read off the measured
joint of the edge.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .dataset import DiscreteTable, Role, Schema
from .dp_core import RdpAccountant, gaussian_mechanism, gaussian_sigma
from .errors import ConfigError
from .marginals import Marginal, MarginalKind, clip_and_rescale, conditional_mutual_information, one_way, two_way
from .model_graph import Edge, SpanningTree

logger = logging.getLogger(__name__)

TWO_WAY_SENSITIVITY = 1.0
DEFAULT_MARKOV_TOLERANCE = 0.002
MIN_ROWS_PER_CELL = 5


def orient(tree: SpanningTree, root: int = 0) -> list[tuple[int, int]]:
    """(parent, child) pairs in breadth-first order from the root."""
    neighbors = tree.neighbors()
    seen = {root}
    queue = deque([root])
    order: list[tuple[int, int]] = []
    while queue:
        node = queue.popleft()
        for child in sorted(neighbors[node]):
            if child not in seen:
                seen.add(child)
                order.append((node, child))
                queue.append(child)
    return order


def _probabilities(attributes: tuple[int, ...], shape: tuple[int, ...], values: np.ndarray) -> Marginal:
    return Marginal(attributes, shape, clip_and_rescale(values, 1.0), MarginalKind.PROBABILITIES)


@dataclass(frozen=True)
class TreeModel:
    """Measured tree-structured distribution over a schema."""

    schema: Schema
    tree: SpanningTree
    root: int
    noisy_one_way: tuple[Marginal, ...]
    noisy_edge_joints: dict[Edge, Marginal] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.tree.n_nodes != len(self.schema):
            msg = f"Tree over {self.tree.n_nodes} attributes does not span a schema of {len(self.schema)}"
            raise ConfigError(msg)
        missing = [e for e in self.tree.edges if e not in self.noisy_edge_joints]
        if missing:
            msg = f"Tree edges without a measured joint: {missing}"
            raise ConfigError(msg)

    def conditional(self, parent: int, child: int) -> tuple[np.ndarray, list[int]]:
        """
        Row-stochastic matrix P[child | parent] and the parent values that had no mass.

        A parent value with no mass in the joint falls back to the child's marginal from the same joint.
        """
        e = (min(parent, child), max(parent, child))
        joint = self.noisy_edge_joints[e].as_matrix()
        if parent != e[0]:
            joint = joint.T
        row_mass = joint.sum(axis=1, keepdims=True)
        child_marginal = joint.sum(axis=0)
        if child_marginal.sum() <= 0:
            child_marginal = np.full(joint.shape[1], 1.0 / max(joint.shape[1], 1))
        else:
            child_marginal = child_marginal / child_marginal.sum()
        empty = (row_mass[:, 0] <= 0).nonzero()[0].tolist()
        with np.errstate(invalid="ignore", divide="ignore"):
            matrix = np.where(row_mass > 0, joint / np.where(row_mass > 0, row_mass, 1.0), child_marginal)
        return matrix, empty

    def zero_mass_parents(self) -> dict[str, list[int]]:
        flagged = {}
        for parent, child in orient(self.tree, self.root):
            _, empty = self.conditional(parent, child)
            if empty:
                flagged[f"{self.schema.names[parent]}->{self.schema.names[child]}"] = empty
        return flagged

    def discrepancy(self) -> dict[str, float]:
        """Largest TVD between each attribute's one-way measurement and the marginals its edge joints imply."""
        worst: dict[str, float] = {}
        for (i, j), joint in self.noisy_edge_joints.items():
            for attribute in (i, j):
                implied = joint.project(attribute).values
                measured = self.noisy_one_way[attribute].values
                gap = 0.5 * float(np.abs(implied - measured).sum())
                name = self.schema.names[attribute]
                worst[name] = max(worst.get(name, 0.0), gap)
        return worst

    def to_dict(self) -> dict[str, object]:
        return {
            "tree": self.tree.to_dict(self.schema.names, self.schema.roles),
            "root": self.schema.names[self.root],
            "orientation": [[self.schema.names[p], self.schema.names[c]] for p, c in orient(self.tree, self.root)],
            "one_way": {
                self.schema.names[i]: [float(v) for v in m.values] for i, m in enumerate(self.noisy_one_way)
            },
            "edge_joints": {
                f"{self.schema.names[i]}|{self.schema.names[j]}": m.to_dict()
                for (i, j), m in sorted(self.noisy_edge_joints.items())
            },
            "one_way_discrepancy": self.discrepancy(),
            "zero_mass_parents": self.zero_mass_parents(),
        }


def measure_model(
    table: DiscreteTable,
    tree: SpanningTree,
    rho_measure: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    noisy_one_way: Sequence[Marginal] | None = None,
    noiseless: bool = False,
) -> TreeModel:
    """
    Measure the tree's two-way marginals with the Gaussian mechanism.

    Each of the k edge count vectors gets noise at sigma = sqrt(k / (2 rho_measure)), so the stage spends
    exactly rho_measure; the noisy counts are clipped and renormalized into probabilities. The one-way
    distributions come from the earlier noisy measurement when given, otherwise from exact counts.
    """
    d = len(table.schema)
    if tree.n_nodes != d:
        msg = f"Tree over {tree.n_nodes} attributes does not span a table of {d}"
        raise ConfigError(msg)
    k = len(tree.edges)
    sigma = 0.0
    if not noiseless and k:
        sigma = gaussian_sigma(rho_measure / k, TWO_WAY_SENSITIVITY)
    joints: dict[Edge, Marginal] = {}
    for i, j in tree.edges:
        counts = two_way(table, i, j)
        values = counts.values
        if not noiseless:
            values, cost = gaussian_mechanism(values, TWO_WAY_SENSITIVITY, sigma, rng)
            accountant.charge(f"measure/two_way[{i},{j}]", cost, "gaussian", sigma)
        joints[(i, j)] = _probabilities((i, j), counts.shape, np.asarray(values))

    if noisy_one_way is None:
        sources = [one_way(table, i) for i in range(d)]
    else:
        sources = list(noisy_one_way)
    one_ways = tuple(_probabilities((i,), m.shape, m.values) for i, m in enumerate(sources))
    logger.info("Measured %d two-way marginals (sigma=%.4g)", k, sigma)
    return TreeModel(table.schema, tree, 0, one_ways, joints)


def sample(model: TreeModel, n_out: int, rng: np.random.Generator) -> DiscreteTable:
    """Draw n_out independent rows: root from its one-way distribution, children by inverse CDF."""
    if n_out < 0:
        msg = f"Cannot sample a negative number of rows: {n_out}"
        raise ConfigError(msg)
    d = len(model.schema)
    data = np.zeros((n_out, d), dtype=np.int64)
    if n_out == 0 or d == 0:
        return DiscreteTable(model.schema, data)

    root_p = model.noisy_one_way[model.root].values
    data[:, model.root] = rng.choice(root_p.size, size=n_out, p=root_p)
    for parent, child in orient(model.tree, model.root):
        matrix, empty = model.conditional(parent, child)
        if empty:
            logger.debug("Parent %d has zero-mass values %s; child %d uses its marginal", parent, empty, child)
        cdf = np.cumsum(matrix, axis=1)
        u = rng.random(n_out)
        drawn = (u[:, None] >= cdf[data[:, parent]]).sum(axis=1)
        data[:, child] = np.minimum(drawn, matrix.shape[1] - 1)
    return DiscreteTable(model.schema, data)


@dataclass(frozen=True)
class MarkovCheck:
    node: int
    other: int
    given: tuple[int, ...]
    value: float | None
    passed: bool
    skipped: bool = False


@dataclass(frozen=True)
class MarkovReport:
    tolerance: float
    checks: tuple[MarkovCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    @property
    def skipped(self) -> tuple[MarkovCheck, ...]:
        return tuple(c for c in self.checks if c.skipped)

    def to_dict(self) -> dict[str, object]:
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "checks": [
                {
                    "node": c.node,
                    "other": c.other,
                    "given": list(c.given),
                    "cmi": c.value,
                    "passed": c.passed,
                    "skipped": c.skipped,
                }
                for c in self.checks
            ],
        }


def _enough_rows(table: DiscreteTable, columns: Sequence[int]) -> bool:
    cells = math.prod(table.schema.domain_sizes[c] for c in columns)
    return table.n_rows >= MIN_ROWS_PER_CELL * cells


def local_markov_verify(
    table: DiscreteTable,
    tree: SpanningTree,
    tolerance: float = DEFAULT_MARKOV_TOLERANCE,
    *,
    root: int = 0,
) -> MarkovReport:
    """
    Check each node against every non-adjacent non-descendant, conditioning on the node's parent.

    Pairs whose conditioning cells cannot be filled with enough rows are skipped and reported.
    """
    parents: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    for parent, child in orient(tree, root):
        parents[child] = parent
        children.setdefault(parent, []).append(child)

    def descendants(node: int) -> set[int]:
        found: set[int] = set()
        stack = list(children.get(node, []))
        while stack:
            n = stack.pop()
            found.add(n)
            stack.extend(children.get(n, []))
        return found

    checks = []
    for node, parent in sorted(parents.items()):
        excluded = descendants(node) | {node, parent}
        for other in range(tree.n_nodes):
            if other in excluded:
                continue
            given = (parent,)
            if not _enough_rows(table, (node, other, parent)):
                checks.append(MarkovCheck(node, other, given, None, passed=False, skipped=True))
                continue
            value = conditional_mutual_information(table, node, other, given)
            checks.append(MarkovCheck(node, other, given, value, passed=value <= tolerance))
    return MarkovReport(tolerance, tuple(checks))


def blocking_nodes(tree: SpanningTree, source: int, target: int, roles: Sequence[Role]) -> tuple[int, ...]:
    """Admissible nodes strictly inside the tree path from source to target."""
    parents = {child: parent for parent, child in orient(tree, source)}
    path = []
    node = parents.get(target)
    while node is not None and node != source:
        path.append(node)
        node = parents.get(node)
    return tuple(sorted(n for n in path if roles[n] is Role.ADMISSIBLE))


def protected_outcome_cmi(table: DiscreteTable, tree: SpanningTree) -> dict[tuple[int, int], float]:
    """I(protected; outcome | admissible nodes on their tree path) for every protected/outcome pair."""
    roles = table.schema.roles
    values = {}
    for p in table.schema.indices(Role.PROTECTED):
        for o in table.schema.indices(Role.OUTCOME):
            given = blocking_nodes(tree, p, o, roles)
            values[(p, o)] = conditional_mutual_information(table, o, p, given)
    return values
