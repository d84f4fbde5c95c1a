"""
Generalized Nash equilibrium with a shared constraint
=====================================================

Two players with quadratic costs share the budget ``x1 + x2 <= 1``,
``x >= 0``. The stacked partial gradients form a monotone affine field,
and the shared set enters as the indicator of its projection.
"""

import numpy as np

from nashsplit import AffineOperator, CustomOperator, IndicatorBox, IndicatorSimplex, SolverConfig
from nashsplit import build_gne, check_monotone, solve_problem
from nashsplit.space import BlockVector, SpaceLayout

lay = SpaceLayout((1, 1))
budget = IndicatorSimplex(2, inequality=True, layout=lay)

# Player 1 pays x1^2 + x1 x2, player 2 pays x2^2 + x1 x2. Giving the costs
# themselves lets the certificate compare objective values on a local grid.
B = CustomOperator(
    lay,
    [lambda x: 2 * x.block(0) + x.block(1), lambda x: x.block(0) + 2 * x.block(1)],
    chi=3.0,
    objectives=[lambda x: x.data[0] ** 2 + x.data[0] * x.data[1],
                lambda x: x.data[1] ** 2 + x.data[0] * x.data[1]],
)
print(check_monotone(B, 1000, seed=0))
spec = build_gne(budget, B)
rep = solve_problem(spec, x0=BlockVector.from_blocks([[0.5], [0.5]]))
print("budget game:", rep.final_x.tolist(), rep.equilibrium_check.method, rep.equilibrium_check.status)

# Costs pulling both players toward 2 inside the unit box: the equilibrium
# sits in the corner (1, 1), where -B lies in the normal cone.
spec = build_gne(IndicatorBox([0, 0], [1, 1], layout=lay), AffineOperator(np.eye(2), c=[-2, -2], layout=lay))
rep = solve_problem(spec)
print("box game:   ", rep.final_x.tolist(), "via", rep.method.value, "in", rep.iterations, "iterations")

# A symmetric positive semidefinite field is cocoercive, so plain
# forward-backward is recommended and allows steps up to 2/chi.
print("recommended method:", spec.recommended_method().value)
