"""Schema, integer-coded tables, CSV ingestion and role labelling."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd
import pyarrow as pa
from pyarrow import csv as pa_csv

from .errors import ConfigError, DatasetError, SchemaMismatchError

logger = logging.getLogger(__name__)

MISSING_VALUE = ""
EMPTY_TABLE_WARNING = "empty table: every attribute has an empty domain"


class Role(StrEnum):
    """Role an attribute plays in the fairness constraint."""

    PROTECTED = "protected"
    ADMISSIBLE = "admissible"
    OUTCOME = "outcome"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class AttributeSpec:
    """One column: name, finite domain size, role and the cell text behind each code."""

    name: str
    domain_size: int
    role: Role = Role.UNLABELED
    values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.domain_size < 0:
            msg = f"Attribute {self.name!r} has negative domain size {self.domain_size}"
            raise DatasetError(msg)
        if self.values and len(self.values) != self.domain_size:
            msg = f"Attribute {self.name!r} lists {len(self.values)} values for a domain of {self.domain_size}"
            raise DatasetError(msg)

    def decode(self, code: int) -> str:
        """Return the cell text of a code; generated attributes fall back to the code itself."""
        return self.values[code] if self.values else str(code)


@dataclass(frozen=True)
class Schema:
    """Ordered attribute list with pairwise disjoint role sets."""

    attributes: tuple[AttributeSpec, ...]
    saturated: bool = False

    def __post_init__(self) -> None:
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            duplicates = sorted({n for n in names if names.count(n) > 1})
            msg = f"Attribute names must be unique, duplicated: {duplicates}"
            raise DatasetError(msg)
        if self.saturated:
            unlabeled = [a.name for a in self.attributes if a.role is Role.UNLABELED]
            if unlabeled:
                msg = f"Saturated schema has unlabeled attributes: {unlabeled}"
                raise ConfigError(msg)

    @classmethod
    def from_sizes(
        cls,
        sizes: Mapping[str, int],
        roles: Mapping[str, Role] | None = None,
        *,
        saturated: bool = False,
    ) -> Schema:
        """Build a schema from name -> domain size, used for generated data."""
        roles = roles or {}
        attributes = tuple(AttributeSpec(name, size, roles.get(name, Role.UNLABELED)) for name, size in sizes.items())
        return cls(attributes, saturated=saturated)

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(a.domain_size for a in self.attributes)

    @property
    def roles(self) -> tuple[Role, ...]:
        return tuple(a.role for a in self.attributes)

    def index_of(self, name: str) -> int:
        """Return the column index of an attribute name."""
        for i, attribute in enumerate(self.attributes):
            if attribute.name == name:
                return i
        msg = f"Unknown attribute {name!r}"
        raise DatasetError(msg)

    def indices(self, role: Role) -> tuple[int, ...]:
        """Return the column indices holding a role."""
        return tuple(i for i, a in enumerate(self.attributes) if a.role is role)

    def with_roles(self, roles: Mapping[str, Role], *, saturated: bool = False) -> Schema:
        """Return a copy with roles applied; attributes not named become unlabeled."""
        unknown = sorted(set(roles) - set(self.names))
        if unknown:
            msg = f"Role configuration names unknown attributes: {unknown}"
            raise ConfigError(msg)
        attributes = tuple(replace(a, role=roles.get(a.name, Role.UNLABELED)) for a in self.attributes)
        return Schema(attributes, saturated=saturated)

    def check_compatible(self, other: Schema) -> None:
        """Raise if two schemas do not describe the same columns and domains."""
        if self.names != other.names or self.domain_sizes != other.domain_sizes:
            msg = (
                f"Schema mismatch: {list(zip(self.names, self.domain_sizes, strict=True))} vs "
                f"{list(zip(other.names, other.domain_sizes, strict=True))}"
            )
            raise SchemaMismatchError(msg)


@dataclass(frozen=True)
class DiscreteTable:
    """Row-major integer-coded data; read-only after construction."""

    schema: Schema
    data: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.int64, copy=True)
        if data.size == 0:
            data = data.reshape(0, len(self.schema))
        if data.ndim != 2 or data.shape[1] != len(self.schema):  # noqa: PLR2004
            msg = f"Rows must have exactly {len(self.schema)} entries, got array of shape {data.shape}"
            raise DatasetError(msg)
        if data.shape[0]:
            sizes = np.asarray(self.schema.domain_sizes, dtype=np.int64)
            out_of_domain = (data < 0) | (data >= sizes)
            if out_of_domain.any():
                row, col = (int(x) for x in np.argwhere(out_of_domain)[0])
                msg = (
                    f"Row {row} holds code {data[row, col]} for attribute {self.schema.names[col]!r} "
                    f"outside its domain of size {sizes[col]}"
                )
                raise DatasetError(msg)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    def __len__(self) -> int:
        return self.n_rows

    def rows(self) -> Iterator[tuple[int, ...]]:
        """Iterate rows as integer tuples."""
        for row in self.data:
            yield tuple(int(v) for v in row)

    def column(self, i: int) -> np.ndarray:
        return self.data[:, i]

    def with_data(self, data: np.ndarray) -> DiscreteTable:
        """Return a table over the same schema holding other rows."""
        return DiscreteTable(self.schema, data)

    def to_frame(self) -> pd.DataFrame:
        """Decode the codes back into the original cell text."""
        columns = {}
        for i, attribute in enumerate(self.schema.attributes):
            lookup = np.asarray([attribute.decode(c) for c in range(attribute.domain_size)], dtype=object)
            columns[attribute.name] = lookup[self.data[:, i]] if self.n_rows else np.asarray([], dtype=object)
        return pd.DataFrame(columns, columns=list(self.schema.names))


@dataclass(frozen=True)
class RoleConfig:
    """Parsed role sidecar: role lists plus the evaluation encodings."""

    protected: tuple[str, ...] = ()
    admissible: tuple[str, ...] = ()
    outcome: tuple[str, ...] = ()
    saturated: bool = False
    privileged: Mapping[str, str] = field(default_factory=dict)
    positive_outcome: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        groups = {"protected": self.protected, "admissible": self.admissible, "outcome": self.outcome}
        seen: dict[str, str] = {}
        for role_name, names in groups.items():
            for name in names:
                if name in seen:
                    msg = f"Attribute {name!r} is listed as both {seen[name]} and {role_name}"
                    raise ConfigError(msg)
                seen[name] = role_name

    def as_mapping(self) -> dict[str, Role]:
        mapping = dict.fromkeys(self.protected, Role.PROTECTED)
        mapping.update(dict.fromkeys(self.admissible, Role.ADMISSIBLE))
        mapping.update(dict.fromkeys(self.outcome, Role.OUTCOME))
        return mapping


def load_role_config(path: Path | str) -> RoleConfig:
    """Read the JSON role sidecar."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        msg = f"Role configuration not found: {path}"
        raise ConfigError(msg) from e
    except json.JSONDecodeError as e:
        msg = f"Role configuration {path} is not valid JSON: {e}"
        raise ConfigError(msg) from e
    if not isinstance(raw, dict):
        msg = f"Role configuration {path} must be a JSON object"
        raise ConfigError(msg)
    unknown = sorted(set(raw) - {"protected", "admissible", "outcome", "saturated", "privileged", "positive_outcome"})
    if unknown:
        msg = f"Role configuration {path} has unknown keys: {unknown}"
        raise ConfigError(msg)
    return RoleConfig(
        protected=tuple(raw.get("protected", ())),
        admissible=tuple(raw.get("admissible", ())),
        outcome=tuple(raw.get("outcome", ())),
        saturated=bool(raw.get("saturated", False)),
        privileged={k: str(v) for k, v in raw.get("privileged", {}).items()},
        positive_outcome={k: str(v) for k, v in raw.get("positive_outcome", {}).items()},
    )


def _read_cells(path: Path) -> pd.DataFrame:
    """Read every cell as text, rejecting rows whose width differs from the header."""
    if not path.is_file():
        msg = f"Input file not found: {path}"
        raise DatasetError(msg)
    try:
        header = pd.read_csv(path, nrows=0, dtype=str).columns
    except pd.errors.EmptyDataError as e:
        msg = f"Input file {path} has no header row"
        raise DatasetError(msg) from e
    convert_options = pa_csv.ConvertOptions(
        column_types={name: pa.string() for name in header},
        null_values=[],
        strings_can_be_null=False,
        quoted_strings_can_be_null=False,
    )
    try:
        table = pa_csv.read_csv(path, convert_options=convert_options)
    except pa.ArrowInvalid as e:
        msg = f"Input file {path} has ragged rows: {e}"
        raise DatasetError(msg) from e
    return table.to_pandas()


def _code_column(cells: pd.Series) -> tuple[np.ndarray, tuple[str, ...]]:
    """First-appearance integer coding; missing cells become one appended category."""
    missing = (cells == MISSING_VALUE).to_numpy()
    codes, uniques = pd.factorize(cells.where(~missing), sort=False)
    values = tuple(str(v) for v in uniques)
    if missing.any():
        codes[missing] = len(values)
        values = (*values, MISSING_VALUE)
    return codes.astype(np.int64), values


def load_csv(path: Path | str, role_config: RoleConfig | Mapping[str, Role | str] | None = None) -> DiscreteTable:
    """
    Load a CSV file into an integer-coded table.

    Each distinct cell text of a column gets a code in order of first appearance. Roles come from the
    sidecar configuration; attributes it does not name stay unlabeled.
    """
    path = Path(path)
    frame = _read_cells(path)
    if isinstance(role_config, RoleConfig):
        roles, saturated = role_config.as_mapping(), role_config.saturated
    else:
        roles, saturated = {k: Role(v) for k, v in (role_config or {}).items()}, False

    attributes = []
    columns = []
    for name in frame.columns:
        codes, values = _code_column(frame[name])
        if MISSING_VALUE in values:
            logger.warning("Attribute %r has missing cells, coded as an extra category", name)
        attributes.append(AttributeSpec(str(name), len(values), Role.UNLABELED, values))
        columns.append(codes)

    schema = Schema(tuple(attributes)).with_roles(roles, saturated=saturated)
    data = np.column_stack(columns) if columns and len(frame) else np.zeros((0, len(attributes)), dtype=np.int64)
    warnings: tuple[str, ...] = ()
    if len(frame) == 0:
        logger.warning("%s has a header but no rows", path)
        warnings = (EMPTY_TABLE_WARNING,)
    table = DiscreteTable(schema, data, warnings)
    logger.info("Loaded %s: %d rows, %d attributes", path, table.n_rows, len(schema))
    return table


def write_csv(table: DiscreteTable, path: Path | str) -> Path:
    """Write the table decoded back to its cell text."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_frame().to_csv(path, index=False)
    return path


def discretize_single_value(table: DiscreteTable) -> DiscreteTable:
    """
    Put every distinct value in its own bucket.

    Integer coding already gives each value its own code, so this pass returns the table unchanged.
    It is the slot where other bucketing strategies plug in.
    """
    return table


def table_from_rows(
    rows: Iterable[Iterable[int]],
    sizes: Mapping[str, int],
    roles: Mapping[str, Role] | None = None,
    *,
    saturated: bool = False,
) -> DiscreteTable:
    """Build a table straight from integer rows, for generated data and tests."""
    schema = Schema.from_sizes(sizes, roles, saturated=saturated)
    data = np.asarray(rows if isinstance(rows, np.ndarray) else [list(r) for r in rows], dtype=np.int64)
    return DiscreteTable(schema, data)


def load_csv_like(path: Path | str, schema: Schema) -> DiscreteTable:
    """
    Load a CSV coded with another table's value dictionaries.

    Synthetic output has to be read this way before it is compared with its source: coding it afresh
    would number values in a different order. A cell text the schema does not know is a mismatch.
    """
    path = Path(path)
    frame = _read_cells(path)
    if tuple(str(c) for c in frame.columns) != schema.names:
        msg = f"{path} has columns {list(frame.columns)}, expected {list(schema.names)}"
        raise SchemaMismatchError(msg)
    columns = []
    for attribute in schema.attributes:
        lookup = {attribute.decode(c): c for c in range(attribute.domain_size)}
        codes = frame[attribute.name].map(lookup)
        unknown = codes.isna()
        if unknown.any():
            examples = sorted(set(frame[attribute.name][unknown]))[:5]
            msg = f"{path}: attribute {attribute.name!r} holds values outside its domain: {examples}"
            raise SchemaMismatchError(msg)
        columns.append(codes.to_numpy(dtype=np.int64))
    data = np.column_stack(columns) if columns and len(frame) else np.zeros((0, len(schema)), dtype=np.int64)
    return DiscreteTable(schema, data)
