"""Baseline DC solution of the bundled 6-bus system and its PTDF matrix.

Loads the Matpower case, solves angles and flows, reports the most loaded
branch, and shows how the PTDF maps injections to flows.
"""

import numpy as np

from gridfactors import build_grounded_system, ptdf_matrix, solve_flow, to_grid, write_factors
from gridfactors.cases import case6ww

case = case6ww()
grid = to_grid(case)
sys = build_grounded_system(grid)

print(f"{grid.n_buses} buses, {grid.n_branches} branches, slack = bus {grid.slack}")
print(f"injections (pu): {np.round(grid.injections(), 3)}")

state = solve_flow(sys)
print("\nbranch flows (MW):")
for e, br in enumerate(grid.branches):
    print(f"  {br.id:>2}  ({br.from_bus},{br.to_bus})  {state.flows[e] * case.base_mva:9.3f}")

branch_id, value = state.max_loaded()
br = grid.branch(branch_id)
print(f"\nmost loaded: branch ({br.from_bus},{br.to_bus}) at {value * case.base_mva:.3f} MW")

# the PTDF row of that branch tells how any injection change lands on it
ptdf = ptdf_matrix(sys)
print(f"\nPTDF row of branch ({br.from_bus},{br.to_bus}):")
for bus_id, val in zip(ptdf.col_labels, ptdf.row(branch_id)):
    print(f"  bus {bus_id}: {val:+.4f}")

# factors reproduce the solved flows exactly
p_r = sys.reduce(grid.injections())
assert np.allclose(ptdf.values @ p_r, state.flows, atol=1e-12)
print("\nPTDF @ p equals the solved flows.")

print("\nCSV export (first lines):")
print("\n".join(write_factors(ptdf).splitlines()[:3]))
