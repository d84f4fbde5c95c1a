"""
Forward-backward versus forward-backward-forward steps
======================================================

When the gradient field is cocoercive, forward-backward accepts steps up
to nearly ``2/chi``; the extra forward step of FBF buys monotone (not
cocoercive) fields at the price of steps below ``1/chi``.
"""

from nashsplit import ConfigError, IndicatorBall, SolverConfig, build_cyclic_projection, solve_problem
from nashsplit.space import BlockVector

spec = build_cyclic_projection([IndicatorBall([0, 0], 1), IndicatorBall([3, 0], 1)])
x0 = BlockVector.from_blocks([[0.0, 1.0], [3.0, -1.0]])
print("chi =", spec.operator.chi, " cocoercive:", spec.operator.cocoercive)

for gamma in (0.2, 0.45, 0.9):
    rep = solve_problem(spec, SolverConfig(method="fb", gamma=gamma), x0)
    print(f"FB  gamma={gamma:<5} {rep.status.value:>9} in {rep.iterations:4d} iterations")

for gamma in (0.2, 0.45, 0.9):
    try:
        rep = solve_problem(spec, SolverConfig(method="fbf", gamma=gamma), x0)
        print(f"FBF gamma={gamma:<5} {rep.status.value:>9} in {rep.iterations:4d} iterations")
    except ConfigError as exc:
        print(f"FBF gamma={gamma:<5} refused: {exc}")
