"""
3-SAT to fair-tree reduction, assignment decoding and the mutual-information gadget dataset.

Reduction layout. Every variable v gets a protected node pi_v and two literal nodes x_v and ~x_v, joined
to pi_v by weight-2 edges. Every clause gets an OR gadget of eight nodes: three inputs, an admissible
node alpha and an output for the first two inputs, then x' (weight-3 link from that output), a second
admissible node alpha' and the outcome node omega for x' and the third input. Inputs join alpha or
alpha' with weight 2 and the next output with weight 1. Every input joins the literal node it stands
for with weight 3. The target weight is k = 22 m + 2 n.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .dataset import DiscreteTable, Role, Schema
from .errors import ConfigError, DecodeError, InfeasibleTargetError, ReductionError
from .model_graph import AttributeGraph, Edge, SpanningTree, complete_fair_forest, edge, has_unblocked_path

logger = logging.getLogger(__name__)

CLAUSE_WIDTH = 3
ASSIGNMENT_WEIGHT = 2.0
CONNECTOR_WEIGHT = 3.0
LINK_WEIGHT = 3.0
ADMISSIBLE_WEIGHT = 2.0
OUTPUT_WEIGHT = 1.0
BRUTE_FORCE_SAT_GUARD = 20
FEASIBILITY_TOLERANCE = 1e-12

Assignment = tuple[bool, ...]


@dataclass(frozen=True)
class SatInstance:
    """3-CNF over variables 1..n_vars; a literal is +v or -v."""

    n_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        if self.n_vars < 1 or not self.clauses:
            msg = f"Need at least one variable and one clause, got {self.n_vars} and {len(self.clauses)}"
            raise ReductionError(msg)
        for clause in self.clauses:
            if len(clause) != CLAUSE_WIDTH:
                msg = f"Clause {clause} does not have exactly three literals"
                raise ReductionError(msg)
            if any(lit == 0 or abs(lit) > self.n_vars for lit in clause):
                msg = f"Clause {clause} uses a variable outside 1..{self.n_vars}"
                raise ReductionError(msg)
            if any(-lit in clause for lit in clause):
                msg = f"Clause {clause} is trivial"
                raise ReductionError(msg)
            if len({abs(lit) for lit in clause}) != CLAUSE_WIDTH:
                msg = f"Clause {clause} repeats a variable"
                raise ReductionError(msg)
        used = {lit for clause in self.clauses for lit in clause}
        for v in range(1, self.n_vars + 1):
            if v not in used or -v not in used:
                msg = f"Variable {v} must occur both positively and negatively"
                raise ReductionError(msg)

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)


def satisfies(phi: SatInstance, theta: Sequence[bool]) -> bool:
    """Every clause has a literal made true by theta (theta[v - 1] is variable v)."""
    if len(theta) != phi.n_vars:
        msg = f"Assignment covers {len(theta)} variables, formula has {phi.n_vars}"
        raise ConfigError(msg)
    return all(any(theta[abs(lit) - 1] == (lit > 0) for lit in clause) for clause in phi.clauses)


def all_satisfying(phi: SatInstance) -> Iterator[Assignment]:
    """Every satisfying assignment, enumerated exhaustively."""
    if phi.n_vars > BRUTE_FORCE_SAT_GUARD:
        msg = f"Exhaustive SAT is limited to {BRUTE_FORCE_SAT_GUARD} variables, got {phi.n_vars}"
        raise ConfigError(msg)
    for theta in itertools.product((False, True), repeat=phi.n_vars):
        if satisfies(phi, theta):
            yield theta


def brute_force_sat(phi: SatInstance) -> Assignment | None:
    return next(all_satisfying(phi), None)


def parse_dimacs(source: str | Path) -> SatInstance:
    """Read DIMACS CNF text (or a path to it)."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    n_vars = None
    literals: list[int] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":  # noqa: PLR2004
                msg = f"Malformed DIMACS header: {line!r}"
                raise ReductionError(msg)
            n_vars = int(parts[2])
            continue
        try:
            literals.extend(int(tok) for tok in line.split())
        except ValueError as e:
            msg = f"Malformed DIMACS clause line: {line!r}"
            raise ReductionError(msg) from e
    if n_vars is None:
        msg = "DIMACS input has no 'p cnf' header"
        raise ReductionError(msg)
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lit in literals:
        if lit == 0:
            clauses.append(tuple(current))
            current = []
        else:
            current.append(lit)
    if current:
        clauses.append(tuple(current))
    return SatInstance(n_vars, tuple(clauses))  # type: ignore[arg-type]


def to_dimacs(phi: SatInstance) -> str:
    lines = [f"p cnf {phi.n_vars} {phi.n_clauses}"]
    lines.extend(" ".join(str(lit) for lit in clause) + " 0" for clause in phi.clauses)
    return "\n".join(lines) + "\n"


def literal_incidence_is_forest(phi: SatInstance) -> bool:
    """Whether the bipartite literal/clause incidence graph has no cycle."""
    g = nx.Graph()
    for c, clause in enumerate(phi.clauses):
        g.add_edges_from((("clause", c), ("literal", lit)) for lit in clause)
    return nx.is_forest(g)


def random_forest_instance(
    n_vars: int,
    n_clauses: int,
    rng: np.random.Generator,
    *,
    satisfiable: bool = True,
    max_tries: int = 10_000,
) -> SatInstance:
    """
    Random instance with a forest literal/clause incidence graph, every literal used.

    This is the regime in which the forward construction of a satisfying assignment is a spanning
    forest of weight exactly 22 m + 2 n. Feasible sizes need 2 n <= 3 m < 3 n.
    """
    for _ in range(max_tries):
        clauses = []
        for _ in range(n_clauses):
            variables = rng.choice(n_vars, size=CLAUSE_WIDTH, replace=False) + 1
            signs = rng.choice((-1, 1), size=CLAUSE_WIDTH)
            clauses.append(tuple(int(v * s) for v, s in zip(variables, signs, strict=True)))
        try:
            phi = SatInstance(n_vars, tuple(clauses))  # type: ignore[arg-type]
        except ReductionError:
            continue
        if not literal_incidence_is_forest(phi):
            continue
        if satisfiable and brute_force_sat(phi) is None:
            continue
        return phi
    msg = f"No valid forest instance with {n_vars} variables and {n_clauses} clauses after {max_tries} tries"
    raise ReductionError(msg)


def unsatisfiable_core_instance(rng: np.random.Generator) -> SatInstance:
    """All eight sign patterns over three variables, relabelled and shuffled."""
    relabel = rng.permutation(3) + 1
    clauses = [
        tuple(int(s * v) for s, v in zip(signs, relabel, strict=True))
        for signs in itertools.product((1, -1), repeat=CLAUSE_WIDTH)
    ]
    order = rng.permutation(len(clauses))
    return SatInstance(3, tuple(clauses[i] for i in order))  # type: ignore[misc]


@dataclass(frozen=True)
class VariableGadget:
    pi: int
    positive: int
    negative: int


@dataclass(frozen=True)
class ClauseGadget:
    literals: tuple[int, int, int]
    inputs: tuple[int, int, int]
    alpha: int
    out: int
    x_prime: int
    alpha_prime: int
    omega: int

    def nodes(self) -> tuple[int, ...]:
        return (*self.inputs, self.alpha, self.out, self.x_prime, self.alpha_prime, self.omega)

    def weighted_edges(self) -> list[tuple[Edge, float]]:
        """The nine internal edges: two chained two-input OR stages."""
        in1, in2, in3 = self.inputs
        return [
            (edge(in1, self.alpha), ADMISSIBLE_WEIGHT),
            (edge(in2, self.alpha), ADMISSIBLE_WEIGHT),
            (edge(in1, self.out), OUTPUT_WEIGHT),
            (edge(in2, self.out), OUTPUT_WEIGHT),
            (edge(self.out, self.x_prime), LINK_WEIGHT),
            (edge(self.x_prime, self.alpha_prime), ADMISSIBLE_WEIGHT),
            (edge(in3, self.alpha_prime), ADMISSIBLE_WEIGHT),
            (edge(self.x_prime, self.omega), OUTPUT_WEIGHT),
            (edge(in3, self.omega), OUTPUT_WEIGHT),
        ]


@dataclass(frozen=True)
class ReductionOutput:
    phi: SatInstance
    graph: AttributeGraph
    k: float
    variables: tuple[VariableGadget, ...]
    clauses: tuple[ClauseGadget, ...]
    decode_map: dict[Edge, int] = field(default_factory=dict)

    def literal_node(self, lit: int) -> int:
        gadget = self.variables[abs(lit) - 1]
        return gadget.positive if lit > 0 else gadget.negative

    def to_dict(self) -> dict[str, object]:
        return {**self.graph.to_dict(), "k": self.k, "n_vars": self.phi.n_vars, "n_clauses": self.phi.n_clauses}


def reduce(phi: SatInstance) -> ReductionOutput:
    """Build the weighted, role-labelled reduction graph and its target weight."""
    names: list[str] = []
    roles: list[Role] = []

    def add(name: str, role: Role = Role.UNLABELED) -> int:
        names.append(name)
        roles.append(role)
        return len(names) - 1

    variables = []
    for v in range(1, phi.n_vars + 1):
        pi = add(f"pi{v}", Role.PROTECTED)
        variables.append(VariableGadget(pi, add(f"x{v}"), add(f"~x{v}")))

    clauses = []
    for c, clause in enumerate(phi.clauses):
        inputs = (add(f"c{c}.in1"), add(f"c{c}.in2"), add(f"c{c}.in3"))
        clauses.append(
            ClauseGadget(
                literals=clause,
                inputs=inputs,
                alpha=add(f"c{c}.alpha", Role.ADMISSIBLE),
                out=add(f"c{c}.out"),
                x_prime=add(f"c{c}.xp"),
                alpha_prime=add(f"c{c}.alpha2", Role.ADMISSIBLE),
                omega=add(f"c{c}.omega", Role.OUTCOME),
            )
        )

    weighted: dict[tuple[int, int], float] = {}
    decode_map: dict[Edge, int] = {}
    for v, gadget in enumerate(variables, start=1):
        weighted[edge(gadget.pi, gadget.positive)] = ASSIGNMENT_WEIGHT
        weighted[edge(gadget.pi, gadget.negative)] = ASSIGNMENT_WEIGHT
        decode_map[edge(gadget.pi, gadget.positive)] = v
        decode_map[edge(gadget.pi, gadget.negative)] = -v
    for gadget in clauses:
        weighted.update(gadget.weighted_edges())
        for lit, node in zip(gadget.literals, gadget.inputs, strict=True):
            gadget_var = variables[abs(lit) - 1]
            target = gadget_var.positive if lit > 0 else gadget_var.negative
            weighted[edge(node, target)] = CONNECTOR_WEIGHT
            decode_map[edge(node, target)] = lit

    graph = AttributeGraph.from_edges(names, roles, weighted)
    k = 22.0 * phi.n_clauses + 2.0 * phi.n_vars
    logger.info("Reduced %d variables / %d clauses to %d nodes, k=%s", phi.n_vars, phi.n_clauses, len(names), k)
    return ReductionOutput(phi, graph, k, tuple(variables), tuple(clauses), decode_map)


def gadget_audit(reduction: ReductionOutput, c: int) -> tuple[int, float, float]:
    """Internal edge count, total internal weight and heaviest internal spanning tree of clause c's gadget."""
    gadget = reduction.clauses[c]
    g = nx.Graph()
    g.add_nodes_from(gadget.nodes())
    g.add_weighted_edges_from((i, j, w) for (i, j), w in gadget.weighted_edges())
    heaviest = nx.maximum_spanning_tree(g, algorithm="kruskal")
    return g.number_of_edges(), g.size(weight="weight"), heaviest.size(weight="weight")


def _witness_position(theta: Sequence[bool], literals: Sequence[int]) -> int:
    for position, lit in enumerate(literals):
        if theta[abs(lit) - 1] == (lit > 0):
            return position
    msg = f"Assignment does not satisfy clause {tuple(literals)}"
    raise ReductionError(msg)


def forward_tree(reduction: ReductionOutput, theta: Sequence[bool]) -> SpanningTree:
    """
    Fair tree of weight k built from a satisfying assignment.

    Each protected node keeps the edge to its false literal; every connector is kept; each OR gadget keeps
    a weight-13 subtree routing omega through the first true input. The forest is then joined into a
    spanning tree with zero-weight pairs.
    """
    phi = reduction.phi
    if not satisfies(phi, theta):
        msg = "The forward construction needs a satisfying assignment"
        raise ReductionError(msg)
    edges: list[Edge] = []
    for v, gadget in enumerate(reduction.variables):
        false_node = gadget.negative if theta[v] else gadget.positive
        edges.append(edge(gadget.pi, false_node))
    for gadget in reduction.clauses:
        connectors = zip(gadget.literals, gadget.inputs, strict=True)
        edges.extend(edge(node, reduction.literal_node(lit)) for lit, node in connectors)
        in1, in2, in3 = gadget.inputs
        edges.extend(
            [
                edge(in1, gadget.alpha),
                edge(in2, gadget.alpha),
                edge(gadget.out, gadget.x_prime),
                edge(gadget.x_prime, gadget.alpha_prime),
                edge(in3, gadget.alpha_prime),
            ]
        )
        position = _witness_position(theta, gadget.literals)
        if position < 2:  # noqa: PLR2004
            edges.extend([edge(gadget.inputs[position], gadget.out), edge(gadget.x_prime, gadget.omega)])
        else:
            edges.extend([edge(in1, gadget.out), edge(in3, gadget.omega)])
    tree = complete_fair_forest(reduction.graph, edges, zero_weight_only=True)
    if tree is None:
        msg = "Forward construction could not be completed; is the literal/clause incidence a forest?"
        raise ReductionError(msg)
    return tree


def _clause_witnesses(tree: SpanningTree, reduction: ReductionOutput) -> dict[int, set[bool]]:
    """Per variable, the polarities of literals whose clause input reaches omega without an admissible node."""
    witnessed: dict[int, set[bool]] = {}
    roles = reduction.graph.roles
    for gadget in reduction.clauses:
        for lit, node in zip(gadget.literals, gadget.inputs, strict=True):
            if has_unblocked_path(tree, node, gadget.omega, roles):
                witnessed.setdefault(abs(lit) - 1, set()).add(lit > 0)
    return witnessed


def _closest_satisfying(
    phi: SatInstance,
    fixed: dict[int, bool],
    preferred: Sequence[bool],
) -> Assignment | None:
    """Satisfying assignment that keeps `fixed` and flips the fewest preferred values, or None."""
    free = [v for v in range(phi.n_vars) if v not in fixed]
    if len(free) > BRUTE_FORCE_SAT_GUARD:
        msg = f"Completing {len(free)} undetermined variables is beyond the guard of {BRUTE_FORCE_SAT_GUARD}"
        raise DecodeError(msg)
    base = [fixed.get(v, preferred[v]) for v in range(phi.n_vars)]
    for n_flips in range(len(free) + 1):
        for flipped in itertools.combinations(free, n_flips):
            theta = list(base)
            for v in flipped:
                theta[v] = not theta[v]
            if satisfies(phi, theta):
                return tuple(theta)
    return None


def decode_assignment(tree: SpanningTree, reduction: ReductionOutput) -> Assignment:
    """
    Read a truth assignment off a fair tree of the reduction graph.

    A clause input that reaches omega without an admissible node in between marks its literal True; these
    witnesses are binding, except for a variable witnessed in both polarities, which the tree leaves open.
    A protected node keeping exactly one assignment edge marks the attached literal False; that reading
    is followed unless it breaks a clause. Variables keeping both or neither edge default to False.

    Zero-weight pairs let a fair tree hang omega off an admissible node, so a heavy fair tree need not
    route every clause through an input. The result is the satisfying assignment closest to the edge
    readings among those agreeing with the witnesses, or the readings themselves when there is none.
    """
    if tree.n_nodes != reduction.graph.n_nodes:
        msg = f"Tree over {tree.n_nodes} nodes does not span the reduction graph of {reduction.graph.n_nodes}"
        raise DecodeError(msg)
    kept = set(tree.edges)
    preferred = []
    for gadget in reduction.variables:
        positive = edge(gadget.pi, gadget.positive) in kept
        negative = edge(gadget.pi, gadget.negative) in kept
        preferred.append(negative and not positive)

    fixed = {}
    for v, polarities in _clause_witnesses(tree, reduction).items():
        if len(polarities) == 1:
            fixed[v] = next(iter(polarities))
        else:
            logger.debug("Variable %d is witnessed in both polarities", v + 1)
    theta = _closest_satisfying(reduction.phi, fixed, preferred)
    if theta is None:
        logger.warning("No assignment agreeing with the tree's clause witnesses satisfies the formula")
        return tuple(fixed.get(v, preferred[v]) for v in range(reduction.phi.n_vars))
    return theta


@dataclass(frozen=True)
class MiDataset:
    """
    A hub attribute holding a copy of one of several uniform sources, or a null value.

    With probability x_j the hub copies source j into its own block of the hub domain (values
    j * n .. j * n + n - 1); with the remaining probability it takes the null value k * n. Knowing the hub
    then pins source j exactly when the hub sits in block j, so I(hub; source_j) = x_j * log2(n).
    """

    n_domain: int
    sources: tuple[str, ...]
    weights: tuple[float, ...]
    null_weight: float
    hub: str = "hub"

    @property
    def hub_domain_size(self) -> int:
        return len(self.sources) * self.n_domain + 1

    def _index(self, name: str) -> int:
        try:
            return self.sources.index(name)
        except ValueError as e:
            msg = f"Unknown source attribute {name!r}"
            raise ConfigError(msg) from e

    def analytic_mutual_information(self, a: str, b: str) -> float:
        """Exact mutual information in bits from closed-form entropies."""
        if self.hub not in (a, b):
            self._index(a)
            self._index(b)
            return 0.0
        j = self._index(b if a == self.hub else a)
        n = float(self.n_domain)

        def plogp(p: float, scale: float) -> float:
            return p * math.log2(p / scale) if p > 0 else 0.0

        h_hub = -math.fsum([plogp(x, n) for x in self.weights] + [plogp(self.null_weight, 1.0)])
        h_joint = -math.fsum(
            [plogp(x, n) if index == j else plogp(x, n * n) for index, x in enumerate(self.weights)]
            + [plogp(self.null_weight, n)]
        )
        return h_hub + math.log2(n) - h_joint

    def hub_distribution(self) -> np.ndarray:
        probabilities = np.repeat(np.asarray(self.weights) / self.n_domain, self.n_domain)
        return np.append(probabilities, self.null_weight)

    def schema(self) -> Schema:
        sizes = {self.hub: self.hub_domain_size} | dict.fromkeys(self.sources, self.n_domain)
        return Schema.from_sizes(sizes)

    def sample(self, n_rows: int, rng: np.random.Generator) -> DiscreteTable:
        """Rows of (hub, source_1, ..., source_k)."""
        k = len(self.sources)
        sources = rng.integers(0, self.n_domain, size=(n_rows, k))
        slot = rng.choice(k + 1, size=n_rows, p=[*self.weights, self.null_weight])
        hub = np.full(n_rows, k * self.n_domain, dtype=np.int64)
        copying = slot < k
        hub[copying] = slot[copying] * self.n_domain + sources[copying, slot[copying]]
        return DiscreteTable(self.schema(), np.column_stack([hub, sources]))

    def copy_frequencies(self, table: DiscreteTable) -> dict[str, float]:
        """Share of rows whose hub value sits in each source's block."""
        block = table.column(0) // self.n_domain
        return {name: float((block == j).mean()) for j, name in enumerate(self.sources)}


def build_mi_dataset(hub_targets: Sequence[tuple[str, float]], n_domain: int, hub: str = "hub") -> MiDataset:
    """Hub/source construction realising the requested mutual information (bits) to each source."""
    if n_domain < 2 or n_domain & (n_domain - 1):  # noqa: PLR2004
        msg = f"Source domain size must be a power of two >= 2, got {n_domain}"
        raise InfeasibleTargetError(msg)
    names = tuple(name for name, _ in hub_targets)
    if len(set(names)) != len(names) or hub in names:
        msg = f"Source names must be distinct and differ from the hub name, got {names}"
        raise InfeasibleTargetError(msg)
    capacity = math.log2(n_domain)
    weights = []
    for name, target in hub_targets:
        if target < 0 or math.isnan(target):
            msg = f"Target for {name!r} must be non-negative, got {target}"
            raise InfeasibleTargetError(msg)
        weights.append(target / capacity)
    total = math.fsum(weights)
    if total > 1.0 + FEASIBILITY_TOLERANCE:
        msg = f"Targets need {total * capacity:.6g} bits of capacity, a domain of {n_domain} offers {capacity:.6g}"
        raise InfeasibleTargetError(msg)
    return MiDataset(n_domain, names, tuple(weights), max(0.0, 1.0 - total), hub)
