"""
Fair structure selection: greedy exponential-mechanism selection, exact best-first search and the
unconstrained private Kruskal baseline.

Scores are the L1 distances q[i, j] between each measured two-way marginal and its independence
estimate; a higher score means a stronger dependence worth spending an edge on.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import psutil
from networkx.utils import UnionFind

from .dataset import DiscreteTable, Role
from .dp_core import RdpAccountant, exponential_mechanism, gaussian_mechanism, gaussian_sigma
from .errors import ConfigError, GuardTrippedError, SelectionError
from .marginals import SCORE_SENSITIVITY, Marginal, estimate_two_way_from_one_way, l1_score, two_way
from .model_graph import Edge, PartialTree, SpanningTree, adjacency, creates_unblocked_path, is_fair_tree

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_CAP = 250_000


class SelectionMode(StrEnum):
    GREEDY = "greedy"
    OPTIMAL = "optimal"
    BASELINE = "baseline"


@dataclass(frozen=True)
class SelectionPlan:
    """How the selection stage spends its share of the budget."""

    rho_selection: float
    mode: SelectionMode = SelectionMode.GREEDY
    noiseless: bool = False
    sensitivity: float = SCORE_SENSITIVITY
    queue_cap: int = DEFAULT_QUEUE_CAP

    def __post_init__(self) -> None:
        if self.rho_selection < 0 or math.isnan(self.rho_selection):
            msg = f"Selection budget must be non-negative, got rho={self.rho_selection}"
            raise ConfigError(msg)
        if not self.noiseless and self.rho_selection == 0:
            msg = "A noisy selection needs a positive budget; use noiseless mode for exact scores"
            raise ConfigError(msg)
        if self.sensitivity <= 0:
            msg = f"Score sensitivity must be positive, got {self.sensitivity}"
            raise ConfigError(msg)
        if self.queue_cap < 1:
            msg = f"Queue cap must be at least 1, got {self.queue_cap}"
            raise ConfigError(msg)


@dataclass
class SearchStats:
    """Counters of one best-first search."""

    expansions: int = 0
    pushes: int = 0
    max_queue: int = 0
    popped_keys: list[float] = field(default_factory=list)
    final_key: float | None = None
    remaining_min_key: float | None = None

    def to_dict(self) -> dict[str, object]:
        return {
            "expansions": self.expansions,
            "pushes": self.pushes,
            "max_queue": self.max_queue,
            "final_key": self.final_key,
            "remaining_min_key": self.remaining_min_key,
        }


@dataclass(frozen=True)
class SelectionResult:
    tree: SpanningTree
    mode: SelectionMode
    stats: SearchStats | None = None


def compute_scores(table: DiscreteTable, noisy_one_way: Sequence[Marginal]) -> np.ndarray:
    """Symmetric matrix of q[i, j] = |M_ij - estimate from the one-way measurements|_1."""
    d = len(table.schema)
    if len(noisy_one_way) != d:
        msg = f"Need one one-way measurement per attribute, got {len(noisy_one_way)} for {d}"
        raise ConfigError(msg)
    scores = np.zeros((d, d))
    for i, j in itertools.combinations(range(d), 2):
        estimate = estimate_two_way_from_one_way(noisy_one_way[i], noisy_one_way[j], table.n_rows)
        scores[i, j] = scores[j, i] = l1_score(two_way(table, i, j), estimate)
    return scores


def _restricted_pairs(roles: Sequence[Role]) -> list[Edge]:
    """All pairs except outcome-to-(neither admissible nor outcome)."""
    allowed = {Role.ADMISSIBLE, Role.OUTCOME}
    pairs = []
    for i, j in itertools.combinations(range(len(roles)), 2):
        if roles[i] is Role.OUTCOME and roles[j] not in allowed:
            continue
        if roles[j] is Role.OUTCOME and roles[i] not in allowed:
            continue
        pairs.append((i, j))
    return pairs


def _private_kruskal(
    scores: np.ndarray,
    pairs: list[Edge],
    rho: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    label: str,
    noiseless: bool,
    sensitivity: float,
) -> list[Edge]:
    """r - 1 selections among pairs joining two components, one exponential mechanism call each."""
    d = scores.shape[0]
    steps = d - 1
    if steps <= 0:
        return []
    epsilon = math.sqrt(8.0 * rho / steps) if not noiseless else math.inf
    components = UnionFind(range(d))
    chosen: list[Edge] = []
    for step in range(steps):
        candidates = [(i, j) for i, j in pairs if components[i] != components[j]]
        if not candidates:
            msg = f"No admissible edge joins the remaining components after {step} selections"
            raise SelectionError(msg)
        candidate_scores = np.array([scores[e] for e in candidates])
        if noiseless:
            # argmax keeps the first maximum: candidates are in lexicographic order
            index = int(np.argmax(candidate_scores))
        else:
            index, cost = exponential_mechanism(candidates, candidate_scores, epsilon, sensitivity, rng)
            accountant.charge(f"{label}/select[{step}]", cost, "exponential", epsilon)
        i, j = candidates[index]
        components.union(i, j)
        chosen.append((i, j))
    return chosen


def greedy_fair_tree(
    scores: np.ndarray,
    roles: Sequence[Role],
    rho: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    noiseless: bool = False,
    sensitivity: float = SCORE_SENSITIVITY,
) -> list[Edge]:
    """
    Greedy fair selection.

    Edges from an outcome to an attribute that is neither admissible nor an outcome are removed up front;
    every neighbour of an outcome is then admissible or an outcome, which makes the result fair. The
    remaining pairs are picked Kruskal-style with r - 1 exponential mechanism calls at
    epsilon = sqrt(8 rho / (r - 1)), so the stage spends exactly rho.
    """
    if len(roles) != scores.shape[0]:
        msg = f"Got {len(roles)} roles for a {scores.shape[0]}-attribute score matrix"
        raise ConfigError(msg)
    edges = _private_kruskal(
        scores,
        _restricted_pairs(roles),
        rho,
        rng,
        accountant,
        label="greedy",
        noiseless=noiseless,
        sensitivity=sensitivity,
    )
    logger.info("Greedy selection picked %d edges", len(edges))
    return edges


def unconstrained_mst_baseline(
    scores: np.ndarray,
    rho: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    noiseless: bool = False,
    sensitivity: float = SCORE_SENSITIVITY,
) -> list[Edge]:
    """Private Kruskal over every pair, with no fairness restriction."""
    pairs = list(itertools.combinations(range(scores.shape[0]), 2))
    return _private_kruskal(
        scores,
        pairs,
        rho,
        rng,
        accountant,
        label="baseline",
        noiseless=noiseless,
        sensitivity=sensitivity,
    )


def measure_scores(
    scores: np.ndarray,
    rho: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    sensitivity: float = SCORE_SENSITIVITY,
) -> np.ndarray:
    """Release every pair's score once through the Gaussian mechanism, sigma = sensitivity * sqrt(r / (2 rho))."""
    d = scores.shape[0]
    pairs = list(itertools.combinations(range(d), 2))
    measured = np.zeros((d, d))
    if not pairs:
        return measured
    sigma = gaussian_sigma(rho / len(pairs), sensitivity)
    for i, j in pairs:
        noisy, cost = gaussian_mechanism(float(scores[i, j]), sensitivity, sigma, rng)
        accountant.charge(f"optimal/measure[{i},{j}]", cost, "gaussian", sigma)
        measured[i, j] = measured[j, i] = noisy
    return measured


def optimal_fair_tree(
    measured_scores: np.ndarray,
    roles: Sequence[Role],
    *,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> tuple[SpanningTree, SearchStats]:
    """
    Exact maximum-score fair tree by best-first search over fair forests.

    Each pair costs q_max - q; a forest is queued under the sum of its edge costs, so the first spanning
    tree popped has the highest total score. Forests are only extended by pairs joining two components
    without opening an unblocked protected-outcome path. Edge sets already queued are not queued again.
    The queue is capped; exceeding the cap raises `GuardTrippedError`.
    """
    d = measured_scores.shape[0]
    if len(roles) != d:
        msg = f"Got {len(roles)} roles for a {d}-attribute score matrix"
        raise ConfigError(msg)
    pairs = list(itertools.combinations(range(d), 2))
    stats = SearchStats()
    if d <= 1:
        return SpanningTree.from_edges(measured_scores, []), stats

    q_max = max(float(measured_scores[e]) for e in pairs)
    costs = {e: q_max - float(measured_scores[e]) for e in pairs}
    counter = itertools.count()
    root = PartialTree(d)
    queue: list[tuple[float, int, PartialTree]] = [(0.0, next(counter), root)]
    seen: set[frozenset[Edge]] = {root.edges}

    while queue:
        key, _, forest = heapq.heappop(queue)
        stats.expansions += 1
        stats.popped_keys.append(key)
        if forest.is_spanning:
            tree = SpanningTree.from_edges(measured_scores, forest.edges)
            if not is_fair_tree(tree, roles):
                msg = "Best-first search produced an unfair tree"
                raise SelectionError(msg)
            stats.final_key = key
            stats.remaining_min_key = min((entry[0] for entry in queue), default=None)
            logger.info(
                "Best-first search done: %d expansions, %d pushes, max queue %d",
                stats.expansions,
                stats.pushes,
                stats.max_queue,
            )
            return tree, stats

        neighbors = adjacency(d, forest.edges)
        for e in pairs:
            if not forest.joins_components(*e) or creates_unblocked_path(neighbors, e[0], e[1], roles):
                continue
            extended = forest.edges | {e}
            if extended in seen:
                continue
            seen.add(extended)
            heapq.heappush(queue, (key + costs[e], next(counter), forest.add(e, costs[e])))
            stats.pushes += 1
        stats.max_queue = max(stats.max_queue, len(queue))
        if len(queue) > queue_cap:
            rss_mb = psutil.Process().memory_info().rss / 1024**2
            logger.warning("Best-first search queue at %d entries (rss %.0f MB), giving up", len(queue), rss_mb)
            msg = (
                f"Best-first search queue exceeded the cap of {queue_cap} entries after "
                f"{stats.expansions} expansions ({d} attributes)"
            )
            raise GuardTrippedError(msg)

    msg = "Best-first search exhausted its queue without a spanning tree"
    raise SelectionError(msg)


def select_tree(
    scores: np.ndarray,
    roles: Sequence[Role],
    plan: SelectionPlan,
    rng: np.random.Generator,
    accountant: RdpAccountant,
) -> SelectionResult:
    """
    Run the selector named by the plan.

    The returned tree is weighted by what the selector may release: exact scores in noiseless mode,
    the Gaussian measurements for the best-first search and nothing for the private greedy selectors.
    """
    if plan.mode is SelectionMode.OPTIMAL:
        measured = (
            scores
            if plan.noiseless
            else measure_scores(scores, plan.rho_selection, rng, accountant, sensitivity=plan.sensitivity)
        )
        tree, stats = optimal_fair_tree(measured, roles, queue_cap=plan.queue_cap)
        return SelectionResult(tree, plan.mode, stats)

    if plan.mode is SelectionMode.GREEDY:
        edges = greedy_fair_tree(
            scores,
            roles,
            plan.rho_selection,
            rng,
            accountant,
            noiseless=plan.noiseless,
            sensitivity=plan.sensitivity,
        )
    else:
        edges = unconstrained_mst_baseline(
            scores,
            plan.rho_selection,
            rng,
            accountant,
            noiseless=plan.noiseless,
            sensitivity=plan.sensitivity,
        )
    weights = scores if plan.noiseless else None
    return SelectionResult(SpanningTree.from_edges(weights, edges, n_nodes=scores.shape[0]), plan.mode)
