"""
Cycles of projections
=====================

Player i wants to sit as close as possible to player i+1 while staying in
its own set. For disjoint sets the equilibria are cycles of projections
``x_i = P_i(x_{i+1})``, which no potential function minimizes when there
are three or more players.
"""

import numpy as np

from nashsplit import IndicatorBall, IndicatorBox, SolverConfig, build_cyclic_projection, build_cyclic_prox
from nashsplit import make_error_schedule, solve_problem
from nashsplit.space import BlockVector

bv = BlockVector.from_blocks

# Two unit balls three apart: the cycle is the pair of closest points.
spec = build_cyclic_projection([IndicatorBall([0, 0], 1), IndicatorBall([3, 0], 1)])
rep = solve_problem(spec, x0=bv([[0.0, 1.0], [3.0, -1.0]]))
print("balls:", np.round(rep.final_x.data, 8), rep.iterations, "iterations, chi =", spec.operator.chi)

# Three intervals on the line. Each player projects its successor.
sets = [IndicatorBox([0], [1]), IndicatorBox([4], [5]), IndicatorBox([2], [3])]
spec = build_cyclic_prox(sets)
rep = solve_problem(spec, x0=bv([[-2.0], [9.0], [0.0]]))
x = rep.final_x
print("intervals:", x.data)
for i in range(3):
    succ = x.block((i + 1) % 3)
    print(f"  x{i + 1} = {x.block(i)[0]:g},  P{i + 1}(x{(i + 1) % 3 + 1}) = {sets[i]._prox(succ, 1.0)[0]:g}")

# Summable errors on every channel: the iteration still settles, a little later.
errs = {ch: make_error_schedule("geometric", seed=0, rho=0.5, magnitude=0.1) for ch in "abc"}
spec = build_cyclic_projection([IndicatorBall([0, 0], 1), IndicatorBall([3, 0], 1)])
noisy = solve_problem(spec, SolverConfig(method="fb", tol=1e-4, errors=errs), bv([[0.0, 1.0], [3.0, -1.0]]))
print("balls with errors:", noisy.status.value, "after", noisy.iterations, "iterations")
