"""Tests for the seeded built-in sources and random instances."""

import numpy as np
import pytest

from fairsynth.dataset import Role
from fairsynth.errors import ConfigError
from fairsynth.generators import (
    CHAIN_SIZES,
    PLANTED_NAMES,
    chain_source_table,
    planted_bias_roles,
    planted_bias_table,
    random_graph,
    random_roles,
    uniform_graph,
)
from fairsynth.metrics import fairness_from_roles


def test_planted_bias_layout() -> None:
    table = planted_bias_table(1_000, np.random.default_rng(0))
    assert table.schema.names == PLANTED_NAMES
    assert table.schema.domain_sizes == (2,) * 5
    assert table.schema.roles == (Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME, Role.UNLABELED, Role.UNLABELED)


def test_planted_bias_parity() -> None:
    """Test that the source carries the planted gap: P(o=1 | s=1) - P(o=1 | s=0) = 0.795 - 0.205."""
    table = planted_bias_table(50_000, np.random.default_rng(1))
    report = fairness_from_roles(table, planted_bias_roles())["s->o"]
    assert report.dp == pytest.approx(0.59, abs=0.02)
    assert report.cdp == pytest.approx(0.45, abs=0.02)


def test_planted_bias_is_seeded() -> None:
    first = planted_bias_table(100, np.random.default_rng(5))
    second = planted_bias_table(100, np.random.default_rng(5))
    assert np.array_equal(first.data, second.data)


def test_chain_source_layout() -> None:
    table = chain_source_table(2_000, np.random.default_rng(0))
    assert table.schema.names == tuple(f"c{i}" for i in range(len(CHAIN_SIZES)))
    assert table.schema.domain_sizes == CHAIN_SIZES
    copied = (table.column(1) == table.column(0) % CHAIN_SIZES[1]).mean()
    # copies with probability 0.7, a fresh draw matches a quarter of the time
    assert copied == pytest.approx(0.7 + 0.3 / 4, abs=0.04)


def test_chain_source_roles() -> None:
    table = chain_source_table(10, np.random.default_rng(0), {"c0": Role.PROTECTED})
    assert table.schema.roles[0] is Role.PROTECTED


@pytest.mark.parametrize("generator", [planted_bias_table, chain_source_table])
def test_negative_row_count(generator: object) -> None:
    with pytest.raises(ConfigError, match="non-negative"):
        generator(-1, np.random.default_rng(0))  # type: ignore[operator]


def test_random_roles_are_disjoint_and_non_empty() -> None:
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(3, 12))
        roles = random_roles(n, rng)
        assert len(roles) == n
        for role in (Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME):
            assert role in roles


def test_saturated_roles_label_everything() -> None:
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert Role.UNLABELED not in random_roles(int(rng.integers(3, 9)), rng, saturated=True)


def test_random_roles_need_three_nodes() -> None:
    with pytest.raises(ConfigError, match="at least 3"):
        random_roles(2, np.random.default_rng(0))


def test_random_graph() -> None:
    graph = random_graph(6, np.random.default_rng(4), max_weight=3)
    assert graph.names == ("a0", "a1", "a2", "a3", "a4", "a5")
    assert np.array_equal(graph.weights, graph.weights.T)
    assert graph.weights.max() <= 3
    assert (np.diag(graph.weights) == 0).all()


def test_uniform_graph() -> None:
    graph = uniform_graph(4, [Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME, Role.UNLABELED], weight=2.0)
    assert len(graph.support()) == 6
    assert {graph.weight(i, j) for i, j in graph.pairs()} == {2.0}
