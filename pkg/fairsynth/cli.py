"""Command line entry point: generate, evaluate, reduce and selftest."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from .config import DEFAULT_SPLIT, RunConfig, parse_split
from .dataset import Role, load_csv, load_csv_like, load_role_config
from .dp_core import DEFAULT_ALPHAS, RdpAccountant
from .errors import EXIT_OK, FairSynthError
from .generators import random_graph
from .hardness import (
    all_satisfying,
    build_mi_dataset,
    forward_tree,
    parse_dimacs,
    random_forest_instance,
    reduce,
)
from .metrics import fairness_from_roles, quality, quality_breakdown_frame
from .model_graph import SpanningTree, brute_force_optimal_fair_tree, is_fair_tree, load_toy_graph
from .pipeline import run_generate, run_select
from .selection import DEFAULT_QUEUE_CAP, SelectionMode, greedy_fair_tree, optimal_fair_tree
from .utils import write_report

logger = logging.getLogger(__name__)

TOY_OPTIMAL_WEIGHT = 30.0
TOY_GREEDY_WEIGHT = 24.0
SELFTEST_TOLERANCE = 1e-9
# (variables, clauses) sizes whose literal/clause incidence can be a forest
FOREST_SIZES = ((3, 2), (4, 3), (5, 4))
MI_TARGETS = (("s1", 3.0), ("s2", 2.0), ("s3", 1.0))


def _split_argument(text: str) -> tuple[float, float, float]:
    try:
        return parse_split(text)
    except FairSynthError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _alphas_argument(text: str) -> tuple[float, ...]:
    try:
        alphas = tuple(float(a) for a in text.split(","))
    except ValueError as e:
        msg = f"Alpha grid must be comma-separated numbers, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from e
    if any(a <= 1 for a in alphas):
        msg = f"Every alpha must exceed 1, got {text!r}"
        raise argparse.ArgumentTypeError(msg)
    return alphas


def _add_generate_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "generate",
        help="Generate a fair synthetic table, or select a tree on a weighted graph with --graph",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="Input CSV with a header row")
    source.add_argument("--graph", help="Graph JSON to select a tree on, or 'toy' for the bundled example")
    parser.add_argument("--roles", type=Path, help="Role sidecar JSON")
    parser.add_argument("--epsilon", type=float, help="Target epsilon")
    parser.add_argument("--delta", type=float, help="Target delta (default 1/n^2)")
    parser.add_argument("--rho", type=float, help="zCDP budget, instead of epsilon")
    parser.add_argument(
        "--split",
        type=_split_argument,
        default=DEFAULT_SPLIT,
        help="Budget fractions for one-way measurement, selection and two-way measurement",
    )
    parser.add_argument(
        "--alphas",
        type=_alphas_argument,
        default=DEFAULT_ALPHAS,
        help="Renyi orders for the epsilon conversion; extended automatically when epsilon is too small for them",
    )
    parser.add_argument("--selector", choices=[m.value for m in SelectionMode], default=SelectionMode.GREEDY.value)
    parser.add_argument("--noiseless", action="store_true", help="Use exact statistics; no privacy")
    parser.add_argument("--n-out", type=int, help="Rows to generate (default: input row count)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--queue-cap", type=int, default=DEFAULT_QUEUE_CAP, help="Best-first search queue limit")
    parser.add_argument("--output-dir", type=Path, default=Path("output"))
    parser.set_defaults(handler=cmd_generate)


def _add_evaluate_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="Quality and fairness of a synthetic table against its source")
    parser.add_argument("--original", type=Path, required=True)
    parser.add_argument("--synthetic", type=Path, required=True)
    parser.add_argument("--roles", type=Path, required=True)
    parser.add_argument("--output", type=Path, help="Report JSON (default: stdout)")
    parser.add_argument("--breakdown", type=Path, help="Optional per-pair CSV")
    parser.set_defaults(handler=cmd_evaluate)


def _add_reduce_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("reduce", help="Reduce a 3-CNF DIMACS file to a fair-tree instance")
    parser.add_argument("--cnf", type=Path, required=True)
    parser.add_argument("--output", type=Path, required=True, help="Graph JSON to write")
    parser.set_defaults(handler=cmd_reduce)


def _add_selftest_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("selftest", help="Run the exact oracle checks in process")
    parser.add_argument("--instances", type=int, default=20, help="Random instances per check")
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=cmd_selftest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairsynth", description="Fair differentially private synthetic data")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_generate_parser(subparsers)
    _add_evaluate_parser(subparsers)
    _add_reduce_parser(subparsers)
    _add_selftest_parser(subparsers)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        input_path=args.input,
        roles_path=args.roles,
        epsilon=args.epsilon,
        delta=args.delta,
        rho=args.rho,
        split=args.split,
        selector=SelectionMode(args.selector),
        noiseless=args.noiseless,
        n_out=args.n_out,
        seed=args.seed,
        alphas=args.alphas,
        queue_cap=args.queue_cap,
        output_dir=args.output_dir,
        graph_path=args.graph,
    )


def cmd_generate(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    if config.graph_path is not None:
        selected = run_select(config)
        tree, paths = selected.selection.tree, selected.paths
    else:
        result = run_generate(config)
        tree, paths = result.selection.tree, result.paths
        print(f"fairsynth: Generated {result.synthetic.n_rows} rows (epsilon={result.budget['epsilon']}).")
    print(f"fairsynth: Tree {list(tree.edges)} total weight {tree.total_weight:g}.")
    for kind, path in paths.items():
        print(f"fairsynth: Wrote {kind} to {path}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    roles = load_role_config(args.roles)
    original = load_csv(args.original, roles)
    synthetic = load_csv_like(args.synthetic, original.schema)
    report = quality(original, synthetic)
    fairness_reports = {
        "original": {k: r.to_dict() for k, r in fairness_from_roles(original, roles).items()},
        "synthetic": {k: r.to_dict() for k, r in fairness_from_roles(synthetic, roles).items()},
    }
    payload = {"quality": report.to_dict(), "fairness": fairness_reports}
    if args.output is not None:
        write_report(payload, args.output)
        print(f"fairsynth: Wrote evaluation to {args.output}")
    else:
        print(json.dumps(payload, indent=2))
    if args.breakdown is not None:
        quality_breakdown_frame(report).to_csv(args.breakdown)
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace) -> int:
    reduction = reduce(parse_dimacs(args.cnf))
    write_report(reduction.to_dict(), args.output)
    print(f"fairsynth: {reduction.graph.n_nodes} nodes, k = {reduction.k:g}; wrote {args.output}")
    return EXIT_OK


def _noiseless_greedy_weight(weights: np.ndarray, roles: Sequence[Role]) -> float:
    edges = greedy_fair_tree(weights, roles, 0.0, np.random.default_rng(0), RdpAccountant(), noiseless=True)
    return SpanningTree.from_edges(weights, edges).total_weight


def check_toy_graph() -> bool:
    graph = load_toy_graph()
    optimal, _ = optimal_fair_tree(graph.weights, graph.roles)
    greedy = _noiseless_greedy_weight(graph.weights, graph.roles)
    return optimal.total_weight == TOY_OPTIMAL_WEIGHT and greedy == TOY_GREEDY_WEIGHT


def check_oracle_equivalence(instances: int, rng: np.random.Generator) -> bool:
    for _ in range(instances):
        graph = random_graph(int(rng.integers(4, 7)), rng)
        tree, _ = optimal_fair_tree(graph.weights, graph.roles)
        oracle = brute_force_optimal_fair_tree(graph)
        if oracle is None or not is_fair_tree(tree, graph.roles):
            return False
        if abs(tree.total_weight - oracle.total_weight) > SELFTEST_TOLERANCE:
            return False
    return True


def check_saturated_greedy(instances: int, rng: np.random.Generator) -> bool:
    for _ in range(instances):
        graph = random_graph(int(rng.integers(4, 7)), rng, saturated=True)
        oracle = brute_force_optimal_fair_tree(graph)
        if oracle is None:
            return False
        if abs(_noiseless_greedy_weight(graph.weights, graph.roles) - oracle.total_weight) > SELFTEST_TOLERANCE:
            return False
    return True


def check_reduction(instances: int, rng: np.random.Generator) -> bool:
    for index in range(instances):
        n_vars, n_clauses = FOREST_SIZES[index % len(FOREST_SIZES)]
        reduction = reduce(random_forest_instance(n_vars, n_clauses, rng))
        for theta in all_satisfying(reduction.phi):
            tree = forward_tree(reduction, theta)
            if not is_fair_tree(tree, reduction.graph.roles) or tree.total_weight != reduction.k:
                return False
    return True


def check_mi_construction() -> bool:
    dataset = build_mi_dataset(MI_TARGETS, 4096)
    return all(
        math.isclose(dataset.analytic_mutual_information(dataset.hub, name), target, abs_tol=1e-12)
        for name, target in MI_TARGETS
    )


def run_selftest(instances: int, seed: int) -> dict[str, bool]:
    """Run every oracle check and report which passed."""
    rng = np.random.default_rng(seed)
    checks: dict[str, Callable[[], bool]] = {
        "toy graph weights": check_toy_graph,
        "optimal search matches exhaustive search": lambda: check_oracle_equivalence(instances, rng),
        "greedy is optimal on saturated instances": lambda: check_saturated_greedy(instances, rng),
        "reduction forward construction": lambda: check_reduction(instances, rng),
        "mutual information construction": check_mi_construction,
    }
    results = {}
    for name, check in checks.items():
        start = time.perf_counter()
        results[name] = check()
        elapsed = time.perf_counter() - start
        print(f"fairsynth: Selftest {name}: {'ok' if results[name] else 'FAILED'}.")
        print(f"fairsynth: Selftest {name} takes: {elapsed:.2f} s.")
    return results


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(args.instances, args.seed)
    return EXIT_OK if all(results.values()) else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except FairSynthError as e:
        logger.error("%s: %s", type(e).__name__, e)  # noqa: TRY400
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
