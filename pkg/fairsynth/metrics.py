"""Quality and fairness measures between an original and a synthetic table."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import chi2_contingency

from .dataset import DiscreteTable, Role, RoleConfig
from .errors import ConfigError, SchemaMismatchError
from .marginals import one_way, tvd, two_way

logger = logging.getLogger(__name__)

NOT_AVAILABLE = "n/a"
FAIRNESS_MEASURES = ("dp", "tprb", "tnrb", "cdp", "ctprb", "ctnrb")


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def cramers_v(counts: np.ndarray) -> float:
    """
    Bias-corrected Cramér's V of a contingency matrix.

    phi2 = max(0, chi2/n - (r-1)(c-1)/(n-1)), with rows and columns corrected the same way. r and c are the
    declared domain sizes, i.e. the shape of `counts`, so an unobserved category does not change the
    correction. Chi-square itself is computed on the observed rows and columns; a table with fewer than two
    observed rows or columns has V = 0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    r, c = counts.shape
    observed = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    n = observed.sum()
    if n <= 1 or observed.shape[0] < 2 or observed.shape[1] < 2:  # noqa: PLR2004
        return 0.0
    chi2 = chi2_contingency(observed, correction=False)[0]
    phi2 = max(0.0, chi2 / n - (r - 1) * (c - 1) / (n - 1))
    r_corr = r - (r - 1) ** 2 / (n - 1)
    c_corr = c - (c - 1) ** 2 / (n - 1)
    denominator = min(r_corr, c_corr) - 1
    if denominator <= 0:
        return 0.0
    return float(min(1.0, math.sqrt(phi2 / denominator)))


@dataclass(frozen=True)
class QualityReport:
    avg_tvd_1way: float
    avg_tvd_2way: float
    acd: float
    tvd_1way: dict[str, float] = field(default_factory=dict)
    tvd_2way: dict[str, float] = field(default_factory=dict)
    cramers_v_diff: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


def _pair_name(names: Sequence[str], i: int, j: int) -> str:
    return f"{names[i]}|{names[j]}"


def quality(original: DiscreteTable, synthetic: DiscreteTable) -> QualityReport:
    """Average one-way and two-way TVD plus the average Cramér's V difference over all pairs."""
    original.schema.check_compatible(synthetic.schema)
    names = original.schema.names
    d = len(names)
    tvd_1 = {names[i]: tvd(one_way(original, i), one_way(synthetic, i)) for i in range(d)}
    tvd_2 = {}
    v_diff = {}
    for i, j in itertools.combinations(range(d), 2):
        real, synth = two_way(original, i, j), two_way(synthetic, i, j)
        key = _pair_name(names, i, j)
        tvd_2[key] = tvd(real, synth)
        v_diff[key] = abs(cramers_v(real.as_matrix()) - cramers_v(synth.as_matrix()))
    return QualityReport(
        avg_tvd_1way=_mean(list(tvd_1.values())),
        avg_tvd_2way=_mean(list(tvd_2.values())),
        acd=_mean(list(v_diff.values())),
        tvd_1way=tvd_1,
        tvd_2way=tvd_2,
        cramers_v_diff=v_diff,
    )


def avg_tvd_on_pairs(original: DiscreteTable, synthetic: DiscreteTable, pairs: Sequence[tuple[int, int]]) -> float:
    """Average two-way TVD restricted to the given pairs, e.g. the edges a model measured."""
    original.schema.check_compatible(synthetic.schema)
    return _mean([tvd(two_way(original, i, j), two_way(synthetic, i, j)) for i, j in pairs])


def quality_breakdown_frame(report: QualityReport) -> pd.DataFrame:
    """Per-pair breakdown as a DataFrame, one row per attribute pair."""
    frame = pd.DataFrame(
        {
            "pair": list(report.tvd_2way),
            "tvd_2way": list(report.tvd_2way.values()),
            "cramers_v_diff": [report.cramers_v_diff[k] for k in report.tvd_2way],
        }
    )
    return frame.set_index("pair")


@dataclass(frozen=True)
class FairnessReport:
    """Signed differences, privileged minus unprivileged; None where a group was empty."""

    protected: str
    outcome: str
    dp: float | None
    tprb: float | None
    tnrb: float | None
    cdp: float | None
    ctprb: float | None
    ctnrb: float | None
    support: dict[str, int] = field(default_factory=dict)
    skipped_mass: dict[str, float] = field(default_factory=dict)

    def measures(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FAIRNESS_MEASURES}

    def to_dict(self) -> dict[str, object]:
        values = {
            name: None if v is None else {"value": abs(v), "sign": int(np.sign(v))}
            for name, v in self.measures().items()
        }
        return {
            "protected": self.protected,
            "outcome": self.outcome,
            **values,
            "support": self.support,
            "skipped_mass": self.skipped_mass,
        }


def _rate_gap(hit: np.ndarray, privileged: np.ndarray, within: np.ndarray) -> float | None:
    """P(hit | privileged, within) - P(hit | unprivileged, within)."""
    top, bottom = within & privileged, within & ~privileged
    if not top.any() or not bottom.any():
        return None
    return float(hit[top].mean() - hit[bottom].mean())


def _conditional_gap(
    hit: np.ndarray,
    privileged: np.ndarray,
    within: np.ndarray,
    groups: np.ndarray,
    n_groups: int,
) -> tuple[float | None, float]:
    """Expectation of the within-group gap over admissible groups weighted by P(A = a); empty groups are skipped."""
    weights = np.bincount(groups, minlength=n_groups) / groups.size
    total = 0.0
    kept = 0.0
    for g in np.flatnonzero(weights):
        gap = _rate_gap(hit, privileged, within & (groups == g))
        if gap is None:
            continue
        total += weights[g] * gap
        kept += weights[g]
    skipped = float(max(0.0, 1.0 - kept))
    return (total / kept if kept > 0 else None), skipped


def fairness(
    table: DiscreteTable,
    protected: int,
    outcome: int,
    admissible: Sequence[int],
    positive_outcome: int,
    privileged: int,
    truth_table: DiscreteTable | None = None,
) -> FairnessReport:
    """
    Demographic parity, true/true-negative rate balance and their admissible-conditioned variants.

    The outcome column is treated as the prediction; true/true-negative rate balance need the paired rows
    of a truth table (same schema, same row count) and are None without one.
    """
    names = table.schema.names
    if table.n_rows == 0:
        msg = "Fairness measures need at least one row"
        raise ConfigError(msg)
    hit = table.column(outcome) == positive_outcome
    priv = table.column(protected) == privileged
    everyone = np.ones(table.n_rows, dtype=bool)

    admissible = tuple(admissible)
    if admissible:
        shape = tuple(table.schema.domain_sizes[a] for a in admissible)
        flat = np.ravel_multi_index(tuple(table.column(a) for a in admissible), shape)
        _, groups = np.unique(flat, return_inverse=True)
        groups = groups.ravel()
    else:
        groups = np.zeros(table.n_rows, dtype=np.int64)
    n_groups = int(groups.max()) + 1

    truth = None
    if truth_table is not None:
        table.schema.check_compatible(truth_table.schema)
        if truth_table.n_rows != table.n_rows:
            msg = f"Truth table has {truth_table.n_rows} rows, predictions have {table.n_rows}"
            raise SchemaMismatchError(msg)
        truth = truth_table.column(outcome) == positive_outcome

    cdp, skipped_dp = _conditional_gap(hit, priv, everyone, groups, n_groups)
    tprb = tnrb = ctprb = ctnrb = None
    skipped = {"cdp": skipped_dp}
    if truth is not None:
        tprb = _rate_gap(hit, priv, truth)
        tnrb = _rate_gap(~hit, priv, ~truth)
        ctprb, skipped["ctprb"] = _conditional_gap(hit, priv, truth, groups, n_groups)
        ctnrb, skipped["ctnrb"] = _conditional_gap(~hit, priv, ~truth, groups, n_groups)

    return FairnessReport(
        protected=names[protected],
        outcome=names[outcome],
        dp=_rate_gap(hit, priv, everyone),
        tprb=tprb,
        tnrb=tnrb,
        cdp=cdp,
        ctprb=ctprb,
        ctnrb=ctnrb,
        support={
            "rows": table.n_rows,
            "privileged": int(priv.sum()),
            "unprivileged": int((~priv).sum()),
            "admissible_groups": n_groups,
        },
        skipped_mass=skipped,
    )


def _encode(table: DiscreteTable, attribute: int, value: str | None) -> int:
    """Code of a declared cell value; without a declaration the first-appearing value (code 0) is used."""
    if value is None:
        return 0
    spec = table.schema.attributes[attribute]
    decoded = [spec.decode(c) for c in range(spec.domain_size)]
    if value not in decoded:
        msg = f"Value {value!r} does not occur in attribute {spec.name!r}"
        raise ConfigError(msg)
    return decoded.index(value)


def fairness_from_roles(
    table: DiscreteTable,
    roles: RoleConfig,
    truth_table: DiscreteTable | None = None,
) -> dict[str, FairnessReport]:
    """One privileged-vs-rest report per declared protected/outcome pair, keyed 'protected->outcome'."""
    schema = table.schema
    admissible = schema.indices(Role.ADMISSIBLE)
    reports = {}
    for p in schema.indices(Role.PROTECTED):
        privileged = _encode(table, p, roles.privileged.get(schema.names[p]))
        for o in schema.indices(Role.OUTCOME):
            positive = _encode(table, o, roles.positive_outcome.get(schema.names[o]))
            key = f"{schema.names[p]}->{schema.names[o]}"
            reports[key] = fairness(table, p, o, admissible, positive, privileged, truth_table)
    return reports


def accuracy(table: DiscreteTable, outcome: int, predictions: Sequence[int] | np.ndarray) -> float:
    """Share of rows whose outcome code equals an externally supplied prediction."""
    predicted = np.asarray(predictions, dtype=np.int64)
    if predicted.shape != (table.n_rows,):
        msg = f"Need one prediction per row ({table.n_rows}), got shape {predicted.shape}"
        raise ConfigError(msg)
    if table.n_rows == 0:
        msg = "Accuracy of an empty table is undefined"
        raise ConfigError(msg)
    return float((table.column(outcome) == predicted).mean())


def compare_runs(reports: Mapping[str, Mapping[str, float | None]], baseline: str = "baseline") -> pd.DataFrame:
    """
    Every run's metrics as a percentage of the baseline run's, on absolute values.

    Rows are metrics, columns are runs; a zero or missing baseline value gives 'n/a'.
    """
    if baseline not in reports:
        msg = f"No baseline run named {baseline!r} among {sorted(reports)}"
        raise ConfigError(msg)
    reference = reports[baseline]
    table: dict[str, dict[str, float | str]] = {}
    for run, metrics in reports.items():
        column: dict[str, float | str] = {}
        for metric, base in reference.items():
            value = metrics.get(metric)
            if base is None or value is None or base == 0:
                column[metric] = NOT_AVAILABLE
            else:
                column[metric] = 100.0 * abs(value) / abs(base)
        table[run] = column
    return pd.DataFrame(table, columns=list(reports))
