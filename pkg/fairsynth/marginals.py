"""Contingency vectors over one or two attributes and the scores computed from them."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.stats import entropy as _entropy

from .dataset import DiscreteTable
from .errors import DatasetError

# Declared L1-score sensitivity used by the privacy accounting. One changed row can move a count-based
# L1 score by up to 2 with the estimate held fixed; 1 is kept as the default accounting constant.
SCORE_SENSITIVITY = 1.0
PROBABILITY_TOLERANCE = 1e-9


class MarginalKind(StrEnum):
    COUNTS = "counts"
    PROBABILITIES = "probabilities"


@dataclass(frozen=True)
class Marginal:
    """Flat contingency vector, row-major over the domains of one or two attributes."""

    attributes: tuple[int, ...]
    shape: tuple[int, ...]
    values: np.ndarray
    kind: MarginalKind = MarginalKind.COUNTS

    def __post_init__(self) -> None:
        if len(self.attributes) not in (1, 2) or len(self.shape) != len(self.attributes):
            msg = f"A marginal covers one or two attributes, got {self.attributes} with shape {self.shape}"
            raise DatasetError(msg)
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if values.size != math.prod(self.shape):
            msg = f"Marginal over {self.attributes} needs {math.prod(self.shape)} entries, got {values.size}"
            raise DatasetError(msg)
        if (values < 0).any():
            msg = f"Marginal over {self.attributes} has negative entries"
            raise DatasetError(msg)
        if self.kind is MarginalKind.PROBABILITIES and values.sum() > 0:
            if abs(values.sum() - 1.0) > PROBABILITY_TOLERANCE:
                msg = f"Probability marginal over {self.attributes} sums to {values.sum()}"
                raise DatasetError(msg)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @property
    def degenerate(self) -> bool:
        """All-zero marginal that cannot be normalized."""
        return self.total == 0.0

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def normalized(self) -> Marginal:
        if self.degenerate:
            msg = f"Cannot normalize the all-zero marginal over {self.attributes}"
            raise DatasetError(msg)
        return Marginal(self.attributes, self.shape, self.values / self.total, MarginalKind.PROBABILITIES)

    def project(self, attribute: int) -> Marginal:
        """Sum a two-way marginal down to one of its attributes."""
        if attribute not in self.attributes:
            msg = f"Attribute {attribute} is not part of the marginal over {self.attributes}"
            raise DatasetError(msg)
        if len(self.attributes) == 1:
            return self
        axis = 1 if self.attributes[0] == attribute else 0
        position = self.attributes.index(attribute)
        return Marginal((attribute,), (self.shape[position],), self.as_matrix().sum(axis=axis), self.kind)

    def to_dict(self) -> dict[str, object]:
        return {
            "attributes": list(self.attributes),
            "shape": list(self.shape),
            "kind": self.kind.value,
            "values": [float(v) for v in self.values],
        }


def _check_index(table: DiscreteTable, i: int) -> None:
    if not 0 <= i < len(table.schema):
        msg = f"Attribute index {i} out of range for {len(table.schema)} attributes"
        raise DatasetError(msg)


def one_way(table: DiscreteTable, i: int) -> Marginal:
    """Count vector of attribute i."""
    _check_index(table, i)
    size = table.schema.domain_sizes[i]
    counts = np.bincount(table.column(i), minlength=size) if table.n_rows else np.zeros(size)
    return Marginal((i,), (size,), counts)


def two_way(table: DiscreteTable, i: int, j: int) -> Marginal:
    """Count vector over (i, j), i outer and j inner."""
    if i == j:
        msg = f"A two-way marginal needs two distinct attributes, got {i} twice"
        raise DatasetError(msg)
    _check_index(table, i)
    _check_index(table, j)
    shape = (table.schema.domain_sizes[i], table.schema.domain_sizes[j])
    if table.n_rows:
        flat = np.ravel_multi_index((table.column(i), table.column(j)), shape)
        counts = np.bincount(flat, minlength=math.prod(shape))
    else:
        counts = np.zeros(math.prod(shape))
    return Marginal((i, j), shape, counts)


def entropy(marginal: Marginal) -> float:
    """Shannon entropy in bits."""
    if marginal.degenerate:
        msg = f"Entropy of the empty marginal over {marginal.attributes} is undefined"
        raise DatasetError(msg)
    return float(_entropy(marginal.values, base=2))


def mutual_information(joint: Marginal) -> float:
    """Mutual information in bits of a two-way marginal; zero cells contribute nothing."""
    if len(joint.attributes) != 2:  # noqa: PLR2004
        msg = f"Mutual information needs a two-way marginal, got attributes {joint.attributes}"
        raise DatasetError(msg)
    if joint.degenerate:
        msg = "Mutual information of an empty table is undefined"
        raise DatasetError(msg)
    matrix = joint.as_matrix()
    h_i = _entropy(matrix.sum(axis=1), base=2)
    h_j = _entropy(matrix.sum(axis=0), base=2)
    h_ij = _entropy(matrix.ravel(), base=2)
    return max(0.0, float(h_i + h_j - h_ij))


def clip_and_rescale(values: np.ndarray, total: float) -> np.ndarray:
    """Clip negative noisy counts to zero and rescale to the given mass; all-zero falls back to uniform."""
    clipped = np.clip(np.asarray(values, dtype=np.float64), 0.0, None)
    mass = clipped.sum()
    if mass <= 0:
        return np.full(clipped.shape, total / clipped.size)
    return clipped * (total / mass)


def estimate_two_way_from_one_way(m_i: Marginal, m_j: Marginal, n: float) -> Marginal:
    """
    Maximum-entropy two-way estimate consistent with two one-way measurements.

    With only one-way measurements the best graphical-model fit is the independence product,
    M[a, b] = m_i[a] * m_j[b] / n, after clipping each input to non-negative mass n.
    """
    if n <= 0:
        msg = "Cannot estimate a two-way marginal for an empty table"
        raise DatasetError(msg)
    if len(m_i.attributes) != 1 or len(m_j.attributes) != 1 or m_i.attributes == m_j.attributes:
        msg = f"Need one-way marginals over distinct attributes, got {m_i.attributes} and {m_j.attributes}"
        raise DatasetError(msg)
    left = clip_and_rescale(m_i.values, n)
    right = clip_and_rescale(m_j.values, n)
    return Marginal((*m_i.attributes, *m_j.attributes), (*m_i.shape, *m_j.shape), np.outer(left, right) / n)


def l1_score(real: Marginal, estimate: Marginal) -> float:
    """L1 distance between a measured count marginal and its estimate."""
    if real.attributes != estimate.attributes or real.shape != estimate.shape:
        msg = f"Shape mismatch: {real.attributes}{real.shape} vs {estimate.attributes}{estimate.shape}"
        raise DatasetError(msg)
    return float(np.abs(real.values - estimate.values).sum())


def tvd(p: Marginal, q: Marginal) -> float:
    """Total variation distance between the normalized vectors."""
    if p.shape != q.shape:
        msg = f"Shape mismatch: {p.shape} vs {q.shape}"
        raise DatasetError(msg)
    return 0.5 * float(np.abs(p.normalized().values - q.normalized().values).sum())


def conditional_mutual_information(table: DiscreteTable, x: int, y: int, given: Sequence[int] = ()) -> float:
    """Plug-in estimate of I(x; y | given) in bits from the rows of a table."""
    if table.n_rows == 0:
        msg = "Conditional mutual information of an empty table is undefined"
        raise DatasetError(msg)
    sizes = table.schema.domain_sizes
    given = tuple(given)

    def joint_entropy(columns: tuple[int, ...]) -> float:
        if not columns:
            return 0.0
        shape = tuple(sizes[c] for c in columns)
        flat = np.ravel_multi_index(tuple(table.column(c) for c in columns), shape)
        _, counts = np.unique(flat, return_counts=True)
        return float(_entropy(counts, base=2))

    value = (
        joint_entropy((*given, x))
        + joint_entropy((*given, y))
        - joint_entropy((*given, x, y))
        - joint_entropy(given)
    )
    return max(0.0, value)
