"""Time score computation and the selectors on a wide generated table."""

import time

try:
    from .dataset import Role, table_from_rows
    from .dp_core import RdpAccountant, derive_rng
    from .errors import GuardTrippedError
    from .generators import random_roles, uniform_graph
    from .pipeline import measure_one_way
    from .selection import compute_scores, greedy_fair_tree, optimal_fair_tree
except ImportError:
    # Handle when run as standalone script
    import sys
    from pathlib import Path

    sys.path.insert(0, str(Path(__file__).parent.parent))
    from fairsynth.dataset import Role, table_from_rows
    from fairsynth.dp_core import RdpAccountant, derive_rng
    from fairsynth.errors import GuardTrippedError
    from fairsynth.generators import random_roles, uniform_graph
    from fairsynth.pipeline import measure_one_way
    from fairsynth.selection import compute_scores, greedy_fair_tree, optimal_fair_tree

N_ATTRIBUTES = 40
N_ROWS = 10_000
DOMAIN_SIZE = 4
RHO = 1.0
SEED = 7
GUARD_NODES = 12

start = time.time()
rng = derive_rng(SEED, "data")
data = rng.integers(0, DOMAIN_SIZE, size=(N_ROWS, N_ATTRIBUTES))
# Each attribute after the first leans on its predecessor so the scores are not flat.
for i in range(1, N_ATTRIBUTES):
    keep = rng.random(N_ROWS) < 0.5  # noqa: PLR2004
    data[keep, i] = data[keep, i - 1]
roles = random_roles(N_ATTRIBUTES, rng)
sizes = {f"a{i}": DOMAIN_SIZE for i in range(N_ATTRIBUTES)}
table = table_from_rows(data, sizes, dict(zip(sizes, roles, strict=True)))
print(f"fairsynth: Building data ({N_ATTRIBUTES} attributes) takes: {(time.time() - start):.2f} s.")

accountant = RdpAccountant()
start_scores = time.time()
noisy_one_way = measure_one_way(table, RHO / 3, derive_rng(SEED, "one_way"), accountant)
scores = compute_scores(table, noisy_one_way)
print(f"fairsynth: Scores ({N_ATTRIBUTES} attributes) takes: {(time.time() - start_scores):.2f} s.")

start_greedy = time.time()
edges = greedy_fair_tree(scores, table.schema.roles, RHO / 3, derive_rng(SEED, "selection"), accountant)
print(f"fairsynth: Greedy selection ({N_ATTRIBUTES} attributes) takes: {(time.time() - start_greedy):.2f} s.")

start_optimal = time.time()
guard_roles = [Role.PROTECTED, Role.ADMISSIBLE, Role.OUTCOME] + [Role.UNLABELED] * (GUARD_NODES - 3)
try:
    optimal_fair_tree(uniform_graph(GUARD_NODES, guard_roles).weights, guard_roles)
    outcome = "finished"
except GuardTrippedError:
    outcome = "guard tripped"
elapsed = time.time() - start_optimal
print(f"fairsynth: Optimal selection ({GUARD_NODES} uniform attributes, {outcome}) takes: {elapsed:.2f} s.")

print(f"fairsynth: Total duration: {(time.time() - start):.2f} s.")
print(f"fairsynth: Spent rho={accountant.total_rho:.6g} on {len(edges)} edges.")
