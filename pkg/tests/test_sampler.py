"""Tests for measuring a tree model, sampling from it and the local Markov check."""

import numpy as np
import pytest

from fairsynth.dataset import DiscreteTable, Role, table_from_rows
from fairsynth.dp_core import RdpAccountant
from fairsynth.errors import ConfigError
from fairsynth.generators import CHAIN_SIZES, chain_source_table
from fairsynth.marginals import Marginal, MarginalKind, one_way, tvd, two_way
from fairsynth.model_graph import SpanningTree
from fairsynth.sampler import (
    TreeModel,
    blocking_nodes,
    local_markov_verify,
    measure_model,
    orient,
    protected_outcome_cmi,
    sample,
)

P, A, O, U = Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME, Role.UNLABELED

CHAIN_EDGES = [(i, i + 1) for i in range(len(CHAIN_SIZES) - 1)]


@pytest.fixture(scope="module")
def chain_table() -> DiscreteTable:
    return chain_source_table(50_000, np.random.default_rng(77))


def _chain_tree() -> SpanningTree:
    return SpanningTree.from_edges(None, CHAIN_EDGES, len(CHAIN_SIZES))


def _noiseless_model(table: DiscreteTable, tree: SpanningTree) -> TreeModel:
    return measure_model(table, tree, 0.0, np.random.default_rng(0), RdpAccountant(), noiseless=True)


def test_orient_breadth_first() -> None:
    tree = SpanningTree.from_edges(None, [(0, 2), (2, 1), (2, 3), (3, 4)], 5)
    assert orient(tree) == [(0, 2), (2, 1), (2, 3), (3, 4)]
    assert orient(tree, root=4) == [(4, 3), (3, 2), (2, 0), (2, 1)]


def test_noiseless_joints_are_exact(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    for i, j in CHAIN_EDGES:
        exact = two_way(chain_table, i, j).normalized().values
        assert np.allclose(model.noisy_edge_joints[(i, j)].values, exact, atol=1e-12)
    assert model.noisy_edge_joints[(0, 1)].kind is MarginalKind.PROBABILITIES


def test_measurement_spends_exactly_its_budget(chain_table: DiscreteTable) -> None:
    accountant = RdpAccountant()
    measure_model(chain_table, _chain_tree(), 0.25, np.random.default_rng(1), accountant)
    assert len(accountant.entries) == len(CHAIN_EDGES)
    assert abs(accountant.total_rho - 0.25) <= 1e-12


def test_measure_rejects_wrong_tree(chain_table: DiscreteTable) -> None:
    tree = SpanningTree.from_edges(None, [(0, 1)], 2)
    with pytest.raises(ConfigError, match="does not span"):
        measure_model(chain_table, tree, 1.0, np.random.default_rng(0), RdpAccountant())


def test_model_needs_every_edge_joint(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    joints = dict(model.noisy_edge_joints)
    del joints[(2, 3)]
    with pytest.raises(ConfigError, match="without a measured joint"):
        TreeModel(model.schema, model.tree, 0, model.noisy_one_way, joints)


def test_sampling_reproduces_marginals(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    synthetic = sample(model, 50_000, np.random.default_rng(3))
    assert synthetic.n_rows == 50_000
    assert synthetic.schema == chain_table.schema
    one_way_tvd = np.mean([tvd(one_way(chain_table, i), one_way(synthetic, i)) for i in range(len(CHAIN_SIZES))])
    two_way_tvd = np.mean([tvd(two_way(chain_table, i, j), two_way(synthetic, i, j)) for i, j in CHAIN_EDGES])
    assert one_way_tvd <= 0.02
    assert two_way_tvd <= 0.03


def test_sample_is_deterministic(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    first = sample(model, 100, np.random.default_rng(9))
    second = sample(model, 100, np.random.default_rng(9))
    assert np.array_equal(first.data, second.data)


def test_sample_zero_rows(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    assert sample(model, 0, np.random.default_rng(0)).n_rows == 0
    with pytest.raises(ConfigError, match="negative"):
        sample(model, -1, np.random.default_rng(0))


def test_zero_mass_parent_falls_back_to_child_marginal() -> None:
    table = table_from_rows([(0, 0), (0, 1), (0, 1), (0, 1)], {"x": 2, "y": 2})
    model = _noiseless_model(table, SpanningTree.from_edges(None, [(0, 1)], 2))
    matrix, empty = model.conditional(0, 1)
    assert empty == [1]
    assert np.allclose(matrix, [[0.25, 0.75], [0.25, 0.75]])
    assert model.zero_mass_parents() == {"x->y": [1]}


def test_conditional_in_reverse_direction() -> None:
    table = table_from_rows([(0, 0), (1, 1), (1, 1), (1, 0)], {"x": 2, "y": 2})
    model = _noiseless_model(table, SpanningTree.from_edges(None, [(0, 1)], 2))
    matrix, empty = model.conditional(1, 0)
    assert empty == []
    # P[x | y = 0] = (1/2, 1/2), P[x | y = 1] = (0, 1)
    assert np.allclose(matrix, [[0.5, 0.5], [0.0, 1.0]])


def test_noisy_probabilities_are_valid(chain_table: DiscreteTable) -> None:
    model = measure_model(chain_table, _chain_tree(), 1e-4, np.random.default_rng(5), RdpAccountant())
    for joint in model.noisy_edge_joints.values():
        assert (joint.values >= 0).all()
        assert joint.total == pytest.approx(1.0)
    synthetic = sample(model, 1_000, np.random.default_rng(6))
    assert synthetic.n_rows == 1_000


def test_model_report(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    report = model.to_dict()
    assert report["root"] == "c0"
    assert report["orientation"][0] == ["c0", "c1"]
    assert set(report["edge_joints"]) == {f"c{i}|c{i + 1}" for i in range(5)}
    # exact one-way counts agree with the exact joints
    assert max(report["one_way_discrepancy"].values()) < 1e-12
    assert report["zero_mass_parents"] == {}


def test_markov_check_passes_on_sampled_data(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    synthetic = sample(model, 100_000, np.random.default_rng(8))
    report = local_markov_verify(synthetic, _chain_tree())
    assert report.checks
    assert report.skipped == ()
    assert report.passed


def test_markov_check_fails_on_wrong_tree(chain_table: DiscreteTable) -> None:
    star = SpanningTree.from_edges(None, [(0, i) for i in range(1, len(CHAIN_SIZES))], len(CHAIN_SIZES))
    report = local_markov_verify(chain_table, star)
    assert not report.passed
    assert report.to_dict()["passed"] is False


def test_markov_check_skips_sparse_cells() -> None:
    table = table_from_rows([(0, 1, 0), (1, 0, 1)], {"x": 2, "y": 2, "z": 2})
    report = local_markov_verify(table, SpanningTree.from_edges(None, [(0, 1), (1, 2)], 3))
    assert len(report.skipped) == len(report.checks) == 1
    assert report.passed


def test_blocking_nodes() -> None:
    tree = SpanningTree.from_edges(None, [(0, 1), (1, 2), (2, 3)], 4)
    assert blocking_nodes(tree, 0, 3, [P, A, U, O]) == (1,)
    assert blocking_nodes(tree, 0, 3, [P, U, U, O]) == ()


def test_sampled_protected_outcome_independence() -> None:
    """Test that data sampled from P - A - O carries no protected information past the admissible node."""
    rng = np.random.default_rng(21)
    s = rng.random(20_000) < 0.5
    a = rng.random(20_000) < np.where(s, 0.8, 0.3)
    o = rng.random(20_000) < np.where(a, 0.7, 0.2) + np.where(s, 0.1, 0.0)
    rows = np.column_stack([s, a, o]).astype(np.int64)
    table = table_from_rows(rows, {"s": 2, "a": 2, "o": 2}, {"s": P, "a": A, "o": O})
    tree = SpanningTree.from_edges(None, [(0, 1), (1, 2)], 3)
    synthetic = sample(_noiseless_model(table, tree), 1_000_000, np.random.default_rng(22))
    assert protected_outcome_cmi(synthetic, tree)[(0, 2)] <= 0.002
    assert protected_outcome_cmi(table, tree)[(0, 2)] > 0.002


def test_marginal_kind_in_one_way_model(chain_table: DiscreteTable) -> None:
    model = _noiseless_model(chain_table, _chain_tree())
    assert all(isinstance(m, Marginal) and m.kind is MarginalKind.PROBABILITIES for m in model.noisy_one_way)
