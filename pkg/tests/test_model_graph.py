"""Tests for attribute graphs, spanning trees and the fair-tree checks."""

import itertools
import json
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from fairsynth.dataset import Role
from fairsynth.errors import ConfigError, GuardTrippedError
from fairsynth.generators import random_graph, random_roles
from fairsynth.model_graph import (
    AttributeGraph,
    PartialTree,
    SpanningTree,
    brute_force_optimal_fair_tree,
    check_spanning,
    complete_fair_forest,
    exposed_roles,
    fair_under_all_orientations,
    has_unblocked_path,
    is_fair_tree,
    kruskal_maximum_spanning_tree,
    neighbor_restriction_check,
)

P, A, O, U = Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME, Role.UNLABELED

AGE, SEX, RELATION, EDUCATION, INCOME = range(5)
TOY_SHARED_EDGES = {(AGE, EDUCATION), (AGE, INCOME), (SEX, EDUCATION)}


def _tree(n_nodes: int, edges: list[tuple[int, int]]) -> SpanningTree:
    return SpanningTree.from_edges(None, edges, n_nodes)


def _all_spanning_trees(n_nodes: int) -> list[list[tuple[int, int]]]:
    trees = []
    for sequence in itertools.product(range(n_nodes), repeat=n_nodes - 2):
        trees.append(list(nx.from_prufer_sequence(list(sequence)).edges()))
    return trees


def _random_tree(n_nodes: int, rng: np.random.Generator) -> SpanningTree:
    sequence = [int(x) for x in rng.integers(0, n_nodes, size=n_nodes - 2)]
    return _tree(n_nodes, list(nx.from_prufer_sequence(sequence).edges()))


def test_toy_graph_layout(toy_graph: AttributeGraph) -> None:
    assert toy_graph.names == ("age", "sex", "relation", "education", "income")
    assert toy_graph.roles == (U, P, U, A, O)
    assert toy_graph.weight(SEX, AGE) == 9
    assert len(toy_graph.support()) == 7


def test_toy_graph_optimal_fair_tree(toy_graph: AttributeGraph) -> None:
    tree = brute_force_optimal_fair_tree(toy_graph)
    assert tree is not None
    assert tree.total_weight == 30
    assert is_fair_tree(tree, toy_graph.roles)
    assert TOY_SHARED_EDGES <= set(tree.edges)


def test_toy_graph_unconstrained_tree_is_unfair(toy_graph: AttributeGraph) -> None:
    """Test that the plain maximum spanning tree is heavier than any fair one and routes sex to income."""
    tree = kruskal_maximum_spanning_tree(toy_graph)
    assert tree.total_weight == 31
    assert not is_fair_tree(tree, toy_graph.roles)
    assert has_unblocked_path(tree, SEX, INCOME, toy_graph.roles)


def test_chain_through_admissible_is_fair() -> None:
    roles = [P, A, O]
    assert is_fair_tree(_tree(3, [(0, 1), (1, 2)]), roles)
    assert not is_fair_tree(_tree(3, [(0, 2), (1, 2)]), roles)


def test_unlabeled_does_not_block() -> None:
    assert not is_fair_tree(_tree(3, [(0, 1), (1, 2)]), [P, U, O])


def test_no_protected_is_trivially_fair() -> None:
    assert is_fair_tree(_tree(3, [(0, 1), (1, 2)]), [U, U, O])


def test_neighbor_restriction_is_stricter_than_fairness() -> None:
    """Test that P - A - U - O is fair although the outcome has an unlabeled neighbour."""
    tree = _tree(4, [(0, 1), (1, 2), (2, 3)])
    roles = [P, A, U, O]
    assert is_fair_tree(tree, roles)
    assert not neighbor_restriction_check(tree, roles)


def test_neighbor_restriction_implies_fairness() -> None:
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(3, 8))
        roles = random_roles(n, rng)
        tree = _random_tree(n, rng)
        if neighbor_restriction_check(tree, roles):
            assert is_fair_tree(tree, roles)


def test_directed_and_undirected_criteria_agree() -> None:
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(3, 8))
        roles = random_roles(n, rng)
        tree = _random_tree(n, rng)
        assert fair_under_all_orientations(tree, roles) == is_fair_tree(tree, roles)


def test_orientation_guard() -> None:
    n = 14
    tree = _tree(n, [(i, i + 1) for i in range(n - 1)])
    with pytest.raises(GuardTrippedError):
        fair_under_all_orientations(tree, [U] * n)


def test_exposed_roles() -> None:
    neighbors = [{1}, {0, 2}, {1, 3}, {2}]
    roles = [P, U, A, O]
    assert exposed_roles(neighbors, 0, roles) == (True, False)
    assert exposed_roles(neighbors, 3, roles) == (False, True)
    assert exposed_roles(neighbors, 2, roles) == (False, False)


@pytest.mark.parametrize(
    ("n_nodes", "edges", "match"),
    [
        (3, [(0, 1)], "has 2 edges"),
        (3, [(0, 1), (1, 0)], "closes a cycle"),
        (3, [(0, 1), (1, 5)], "distinct attributes"),
        (3, [(0, 1), (2, 2)], "distinct attributes"),
    ],
)
def test_check_spanning_rejects(n_nodes: int, edges: list[tuple[int, int]], match: str) -> None:
    with pytest.raises(ConfigError, match=match):
        check_spanning(n_nodes, edges)


def test_single_node_tree() -> None:
    tree = _tree(1, [])
    assert tree.edges == ()
    assert tree.total_weight == 0.0
    assert is_fair_tree(tree, [P])


def test_spanning_tree_canonical_edges(toy_graph: AttributeGraph) -> None:
    tree = SpanningTree.from_edges(toy_graph.weights, [(3, 0), (4, 0), (3, 1), (2, 1)])
    assert tree.edges == ((0, 3), (0, 4), (1, 2), (1, 3))
    assert tree.edge_weights == (9.0, 8.0, 5.0, 8.0)
    assert tree.total_weight == 30
    assert tree.rescored(np.ones((5, 5))).total_weight == 4


def test_tree_report(toy_graph: AttributeGraph) -> None:
    tree = SpanningTree.from_edges(toy_graph.weights, [(0, 3), (0, 4), (1, 3), (1, 2)])
    report = tree.to_dict(toy_graph.names, toy_graph.roles)
    assert report["fair"] is True
    assert report["total_weight"] == 30
    assert {"source": "age", "target": "education", "weight": 9.0} in report["edges"]


@pytest.mark.parametrize(
    ("weights", "match"),
    [
        (np.array([[0.0, 1.0], [2.0, 0.0]]), "symmetric"),
        (np.array([[0.0, -1.0], [-1.0, 0.0]]), "non-negative"),
        (np.zeros((3, 3)), "weight matrix"),
    ],
)
def test_graph_validation(weights: np.ndarray, match: str) -> None:
    with pytest.raises(ConfigError, match=match):
        AttributeGraph(("x", "y"), (U, U), weights)


def test_graph_diagonal_is_ignored() -> None:
    graph = AttributeGraph(("x", "y"), (U, U), np.array([[5.0, 1.0], [1.0, 7.0]]))
    assert graph.weight(0, 0) == 0.0
    assert not graph.weights.flags.writeable


def test_graph_json_round_trip(tmp_path: Path, toy_graph: AttributeGraph) -> None:
    path = toy_graph.to_json(tmp_path / "graph.json")
    loaded = AttributeGraph.from_json(path)
    assert loaded.names == toy_graph.names
    assert loaded.roles == toy_graph.roles
    assert np.array_equal(loaded.weights, toy_graph.weights)


def test_graph_json_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="Cannot read"):
        AttributeGraph.from_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": [{"name": "x"}], "edges": [{"source": "x", "target": "y"}]}), encoding="utf-8")
    with pytest.raises(ConfigError, match="Malformed"):
        AttributeGraph.from_json(bad)


def test_self_loop_rejected() -> None:
    with pytest.raises(ConfigError, match="Self loop"):
        AttributeGraph.from_edges(["x", "y"], [U, U], {(0, 0): 1.0})


def test_index_of(toy_graph: AttributeGraph) -> None:
    assert toy_graph.index_of("income") == INCOME
    with pytest.raises(ConfigError, match="Unknown attribute"):
        toy_graph.index_of("zip")


def test_partial_tree_add() -> None:
    forest = PartialTree(4).add((0, 1), 2.0).add((2, 3), 1.5)
    assert forest.key == 3.5
    assert not forest.joins_components(1, 0)
    assert forest.joins_components(1, 2)
    assert not forest.is_spanning
    assert forest.add((1, 2), 0.0).is_spanning


def test_complete_fair_forest_without_admissible() -> None:
    graph = AttributeGraph(("p", "o", "u"), (P, O, U), np.zeros((3, 3)))
    assert complete_fair_forest(graph, []) is None


def test_complete_fair_forest_joins_through_admissible() -> None:
    graph = AttributeGraph(("p", "a", "o", "u"), (P, A, O, U), np.zeros((4, 4)))
    tree = complete_fair_forest(graph, [])
    assert tree is not None
    assert is_fair_tree(tree, graph.roles)


def test_brute_force_support_guard() -> None:
    graph = random_graph(8, np.random.default_rng(0), max_weight=1)
    with pytest.raises(GuardTrippedError, match="limited to 3"):
        brute_force_optimal_fair_tree(graph, max_support_edges=3)


def test_brute_force_on_empty_support() -> None:
    graph = AttributeGraph(("p", "a", "o"), (P, A, O), np.zeros((3, 3)))
    tree = brute_force_optimal_fair_tree(graph)
    assert tree is not None
    assert tree.total_weight == 0.0
    assert is_fair_tree(tree, graph.roles)


def test_brute_force_matches_full_enumeration() -> None:
    """Test the pruned search against scoring every labelled tree on five attributes."""
    rng = np.random.default_rng(5)
    all_trees = _all_spanning_trees(5)
    for _ in range(40):
        graph = random_graph(5, rng)
        best = max(
            SpanningTree.from_edges(graph.weights, edges).total_weight
            for edges in all_trees
            if is_fair_tree(_tree(5, edges), graph.roles)
        )
        tree = brute_force_optimal_fair_tree(graph)
        assert tree is not None
        assert is_fair_tree(tree, graph.roles)
        assert tree.total_weight == best
