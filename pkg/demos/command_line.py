"""
Driving the solver from problem files
=====================================

Problems can be written as JSON and solved with the ``nashsplit`` command.
This script writes two files to a temporary directory and calls the same
entry point the console script uses.
"""

import json
import tempfile
from pathlib import Path

from nashsplit.cli import main

tmp = Path(tempfile.mkdtemp())

pennies = {"kind": "zero_sum", "L": [[1, -1], [-1, 1]], "x0": [[1, 0], [1, 0]]}
(tmp / "pennies.json").write_text(json.dumps(pennies))

cycle = {
    "kind": "cyclic_projection",
    "sets": [{"type": "box", "lo": [0], "hi": [1]},
             {"type": "box", "lo": [4], "hi": [5]},
             {"type": "box", "lo": [2], "hi": [3]}],
    "x0": [[-2], [9], [0]],
    "solver": {"method": "fb", "errors": "geometric:0.5:0.1", "seed": 3, "tol": 1e-6},
}
(tmp / "cycle.json").write_text(json.dumps(cycle))

# solve: exit status 0 means converged; the trace is a CSV with one row per recorded step
code = main(["solve", str(tmp / "pennies.json"), "--trace", str(tmp / "pennies.csv"), "--trace-every", "25"])
print("exit status", code)
print((tmp / "pennies.csv").read_text())

# check: sampled monotonicity, Lipschitz and cocoercivity tests
main(["check", str(tmp / "cycle.json"), "--samples", "500", "--seeds", "0", "1"])

# oracle: support enumeration for zero-sum games
main(["oracle", str(tmp / "pennies.json")])

# a step outside the admissible range is refused before iterating (exit status 1)
print("exit status", main(["solve", str(tmp / "pennies.json"), "--gamma", "0.6"]))
