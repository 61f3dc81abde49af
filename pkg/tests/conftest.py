"""Shared fixtures: the bundled toy graph, seeded generators and small tables."""

from pathlib import Path

import numpy as np
import pytest

from fairsynth.dataset import DiscreteTable, table_from_rows
from fairsynth.model_graph import AttributeGraph, load_toy_graph

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def toy_graph() -> AttributeGraph:
    return load_toy_graph()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240521)


@pytest.fixture
def binary_pair_table() -> DiscreteTable:
    """Two perfectly correlated binary attributes, four rows."""
    return table_from_rows([(0, 0), (1, 1), (0, 0), (1, 1)], {"x": 2, "y": 2})


@pytest.fixture
def roles_file(tmp_path: Path) -> Path:
    path = tmp_path / "roles.json"
    path.write_text(
        '{"protected": ["sex"], "admissible": ["edu"], "outcome": ["income"], '
        '"privileged": {"sex": "M"}, "positive_outcome": {"income": "high"}}',
        encoding="utf-8",
    )
    return path


@pytest.fixture
def people_csv(tmp_path: Path) -> Path:
    """Small four-column CSV with roles for sex, edu and income."""
    rows = ["sex,edu,income,city"]
    patterns = [
        ("M", "uni", "high", "a"),
        ("F", "school", "low", "b"),
        ("M", "school", "low", "a"),
        ("F", "uni", "high", "c"),
        ("M", "uni", "low", "b"),
        ("F", "school", "low", "a"),
    ]
    rows.extend(",".join(p) for p in patterns * 10)
    path = tmp_path / "people.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
