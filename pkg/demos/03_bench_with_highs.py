"""Benchmark a few classes with HiGHS behind the external-solver adapter.

The adapter only knows how to write an LP file and read `name value`
lines back, so any MILP solver can be plugged in through a command
template. This uses the bundled HiGHS runner (needs `highspy`), warm
started from the residual-rounding heuristic through `{start_file}`.
"""

import sys
from pathlib import Path

from mvbp.bench import max_time, render_table, run_bench
from mvbp.solver import BackendConfig

runner = Path(__file__).resolve().parents[1] / "scripts" / "highs_lp_solve.py"
config = BackendConfig(
    kind="external",
    command_template=f"{sys.executable} {runner} {{model_file}} {{solution_file}} --start {{start_file}}",
    time_limit=60,
)

rows, records = run_bench([(3, 3, 25), (3, 3, 100), (2, 5, 100)], seeds=3, config=config)
print(render_table(rows), end="")
print(f"slowest instance {max_time(records):.2f}s")

# the builtin branch-and-bound needs no external solver for classes
# with few patterns
rows, _ = run_bench([(3, 3, 100)], seeds=3, config=BackendConfig(kind="builtin"))
print(render_table(rows), end="")
