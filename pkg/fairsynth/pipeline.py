"""
The three-stage generate run: noisy one-way measurements, fair structure selection, then measuring the
selected two-way marginals and sampling from the tree model.

Every stage draws from its own generator split off the run seed, and the ledger is checked against the
budget before anything leaves the process.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import DiscreteTable, Role, RoleConfig, load_csv, load_role_config, write_csv
from .dp_core import RdpAccountant, derive_rng, gaussian_mechanism, gaussian_sigma, rdp_to_dp
from .errors import ConfigError, DatasetError, SelectionError
from .marginals import Marginal, clip_and_rescale, one_way
from .model_graph import AttributeGraph, is_fair_tree, load_toy_graph
from .sampler import TreeModel, measure_model, sample
from .selection import SelectionMode, SelectionPlan, SelectionResult, compute_scores, select_tree
from .utils import get_output_paths, write_report

logger = logging.getLogger(__name__)

ONE_WAY_SENSITIVITY = 1.0
TOY_GRAPH = "toy"


def measure_one_way(
    table: DiscreteTable,
    rho: float,
    rng: np.random.Generator,
    accountant: RdpAccountant,
    *,
    noiseless: bool = False,
) -> tuple[Marginal, ...]:
    """Every attribute's counts with Gaussian noise at sigma = sqrt(d / (2 rho)), clipped back to n rows."""
    d = len(table.schema)
    exact = [one_way(table, i) for i in range(d)]
    if noiseless or d == 0:
        return tuple(exact)
    sigma = gaussian_sigma(rho / d, ONE_WAY_SENSITIVITY)
    measured = []
    for i, counts in enumerate(exact):
        noisy, cost = gaussian_mechanism(counts.values, ONE_WAY_SENSITIVITY, sigma, rng)
        accountant.charge(f"one_way[{i}]", cost, "gaussian", sigma)
        measured.append(Marginal((i,), counts.shape, clip_and_rescale(np.asarray(noisy), table.n_rows)))
    logger.info("Measured %d one-way marginals (sigma=%.4g)", d, sigma)
    return tuple(measured)


def budget_report(
    accountant: RdpAccountant,
    rho: float,
    delta: float,
    stages: dict[str, float],
    alphas: Sequence[float],
    *,
    noiseless: bool,
) -> dict[str, object]:
    """Ledger plus the (epsilon, delta) it converts to; a noiseless run claims no privacy."""
    report = accountant.to_dict(delta, alphas)
    if noiseless:
        report["epsilon"] = None
        report["best_alpha"] = None
    return {"noiseless": noiseless, "rho_budget": rho, "stages": stages, "alphas": list(alphas), **report}


def _check_fair(result: SelectionResult, roles: Sequence[Role]) -> None:
    if result.mode is not SelectionMode.BASELINE and not is_fair_tree(result.tree, roles):
        msg = f"The {result.mode} selector returned an unfair tree: {result.tree.edges}"
        raise SelectionError(msg)


@dataclass(frozen=True)
class GenerateResult:
    synthetic: DiscreteTable
    model: TreeModel
    selection: SelectionResult
    rho: float
    delta: float
    budget: dict[str, object]
    paths: dict[str, Path] = field(default_factory=dict)


def generate(table: DiscreteTable, config: RunConfig, *, write: bool = True) -> GenerateResult:
    """Run all three stages on a loaded table; writes the CSV, model and budget files unless told not to."""
    if table.n_rows == 0:
        msg = "Cannot generate from an empty table"
        raise DatasetError(msg)
    rho, delta = config.resolve_rho(table.n_rows)
    stages = config.stage_budgets(rho)
    accountant = RdpAccountant()
    roles = table.schema.roles
    logger.info(
        "Generating from %d rows x %d attributes: rho=%.6g, delta=%.3g, selector=%s",
        table.n_rows,
        len(table.schema),
        rho,
        delta,
        config.selector,
    )

    start = time.perf_counter()
    noisy_one_way = measure_one_way(
        table, stages["one_way"], derive_rng(config.seed, "one_way"), accountant, noiseless=config.noiseless
    )
    logger.info("Stage one-way done in %.2f s", time.perf_counter() - start)

    start = time.perf_counter()
    scores = compute_scores(table, noisy_one_way)
    plan = SelectionPlan(
        stages["selection"],
        config.selector,
        noiseless=config.noiseless,
        sensitivity=config.sensitivity,
        queue_cap=config.queue_cap,
    )
    selection = select_tree(scores, roles, plan, derive_rng(config.seed, "selection"), accountant)
    _check_fair(selection, roles)
    logger.info("Stage selection done in %.2f s: %s", time.perf_counter() - start, selection.tree.edges)

    start = time.perf_counter()
    model = measure_model(
        table,
        selection.tree,
        stages["measure"],
        derive_rng(config.seed, "measure"),
        accountant,
        noisy_one_way=noisy_one_way,
        noiseless=config.noiseless,
    )
    accountant.assert_total(rho)
    n_out = table.n_rows if config.n_out is None else config.n_out
    synthetic = sample(model, n_out, derive_rng(config.seed, "sample"))
    logger.info("Stage measure and sample done in %.2f s", time.perf_counter() - start)

    alphas = config.effective_alphas(delta)
    budget = budget_report(accountant, rho, delta, stages, alphas, noiseless=config.noiseless)
    paths: dict[str, Path] = {}
    if write:
        paths = get_output_paths(config.output_dir)
        write_csv(synthetic, paths["synthetic"])
        model_report = {
            "selector": str(config.selector),
            "seed": config.seed,
            "search": selection.stats.to_dict() if selection.stats else None,
            **model.to_dict(),
        }
        write_report(model_report, paths["model"])
        write_report(budget, paths["budget"])
        logger.info("Wrote %s", ", ".join(str(p) for p in paths.values()))
    return GenerateResult(synthetic, model, selection, rho, delta, budget, paths)


def load_inputs(config: RunConfig) -> DiscreteTable:
    """Read the input CSV with the roles from the sidecar, if one is configured."""
    if config.input_path is None:
        msg = "This run has no input CSV"
        raise ConfigError(msg)
    roles = load_role_config(config.roles_path) if config.roles_path is not None else RoleConfig()
    return load_csv(config.input_path, roles)


def run_generate(config: RunConfig) -> GenerateResult:
    return generate(load_inputs(config), config)


def load_graph(source: Path | str) -> AttributeGraph:
    """The bundled worked example for 'toy', otherwise a graph JSON file."""
    if str(source) == TOY_GRAPH:
        return load_toy_graph()
    return AttributeGraph.from_json(source)


@dataclass(frozen=True)
class SelectRunResult:
    graph: AttributeGraph
    selection: SelectionResult
    budget: dict[str, object]
    paths: dict[str, Path] = field(default_factory=dict)


def run_select(config: RunConfig, *, write: bool = True) -> SelectRunResult:
    """
    Selection alone on a weighted graph, whose edge weights stand in for the scores.

    There are no rows to derive delta from, so an epsilon budget needs an explicit delta; the whole
    budget goes to selection.
    """
    if config.graph_path is None:
        msg = "A selection-only run needs a graph"
        raise ConfigError(msg)
    if config.epsilon is not None and config.delta is None:
        msg = "A selection-only run with an epsilon budget needs an explicit delta"
        raise ConfigError(msg)
    graph = load_graph(config.graph_path)
    rho, delta = config.resolve_rho(graph.n_nodes)
    accountant = RdpAccountant()
    plan = SelectionPlan(
        rho,
        config.selector,
        noiseless=config.noiseless,
        sensitivity=config.sensitivity,
        queue_cap=config.queue_cap,
    )
    selection = select_tree(graph.weights, graph.roles, plan, derive_rng(config.seed, "selection"), accountant)
    _check_fair(selection, graph.roles)
    accountant.assert_total(rho)
    alphas = config.effective_alphas(delta)
    budget = budget_report(accountant, rho, delta, {"selection": rho}, alphas, noiseless=config.noiseless)
    logger.info("Selected %s with total weight %s", selection.tree.edges, selection.tree.total_weight)

    paths: dict[str, Path] = {}
    if write:
        all_paths = get_output_paths(config.output_dir, stem="selection")
        paths = {kind: all_paths[kind] for kind in ("model", "budget")}
        model_report = {
            "selector": str(config.selector),
            "seed": config.seed,
            "search": selection.stats.to_dict() if selection.stats else None,
            "tree": selection.tree.to_dict(graph.names, graph.roles),
        }
        write_report(model_report, paths["model"])
        write_report(budget, paths["budget"])
    return SelectRunResult(graph, selection, budget, paths)


def reported_epsilon_matches(budget: dict[str, object], tolerance: float = 1e-9) -> bool:
    """Re-derive epsilon from the logged total rho and compare it with the reported one."""
    if budget.get("noiseless"):
        return budget.get("epsilon") is None
    alphas = [float(a) for a in budget["alphas"]]  # type: ignore[attr-defined]
    epsilon, _ = rdp_to_dp(float(budget["total_rho"]), float(budget["delta"]), alphas)  # type: ignore[arg-type]
    return abs(epsilon - float(budget["epsilon"])) <= tolerance  # type: ignore[arg-type]
