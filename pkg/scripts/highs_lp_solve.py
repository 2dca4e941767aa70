#!/usr/bin/env python3
"""Solve an LP-format MILP with HiGHS and write ``name value`` lines.

Usage as an external backend command template::

    python3 scripts/highs_lp_solve.py {model_file} {solution_file} [--start {start_file}]

``--start`` reads a feasible point in the same ``name value`` format and
hands it to HiGHS as the initial incumbent; an empty file is ignored. A
start above the cutoff of the first pass (below) is held back until the
plain solve, since it was seen to slow that pass down.

With integral costs the runner first solves the LP relaxation, rounds its
bound up to the gcd of the costs and searches only below that target plus
half a step. Any point found there is optimal. Otherwise it falls back to
a plain solve (``--no-target`` skips the first pass).

Exit status is 0 only when HiGHS proves optimality. The solution file is
written whenever HiGHS has a feasible point, with a ``# bb_nodes N`` line.
"""

import argparse
import math
import sys
import time

import highspy


def read_start(path: str) -> dict[str, float]:
    values = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2 and not line.startswith("#"):
                values[parts[0]] = float(parts[1])
    return values


def cost_step(costs) -> int | None:
    """gcd of the objective coefficients when all are integral, else None."""
    if not all(float(c).is_integer() for c in costs):
        return None
    nonzero = [abs(int(c)) for c in costs if c]
    return math.gcd(*nonzero) if nonzero else None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model_file")
    ap.add_argument("solution_file")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--start", default=None, help="initial feasible point, name value lines")
    ap.add_argument(
        "--no-target", action="store_true", help="skip the pass cut off at the rounded LP bound"
    )
    args = ap.parse_args(argv)
    started = time.perf_counter()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("mip_rel_gap", 0.0)
    if h.readModel(args.model_file) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.model_file}", file=sys.stderr)
        return 2
    lp = h.getLp()
    start = read_start(args.start) if args.start else {}

    def start_value(point: dict[str, float]) -> float:
        return sum(c * point.get(name, 0.0) for name, c in zip(lp.col_names_, lp.col_cost_))

    def run(objective_bound: float) -> None:
        if args.time_limit is not None:
            h.setOptionValue("time_limit", max(args.time_limit - (time.perf_counter() - started), 0.0))
        h.setOptionValue("objective_bound", objective_bound)
        if start and start_value(start) <= objective_bound:
            sol = highspy.HighsSolution()
            sol.col_value = [start.get(name, 0.0) for name in lp.col_names_]
            sol.value_valid = True
            h.setSolution(sol)
        h.run()

    # integral costs: every objective value is a multiple of their gcd, so a
    # gap below one step already proves optimality
    step = cost_step(lp.col_cost_)
    if step:
        h.setOptionValue("mip_abs_gap", step - 1e-5)
    nodes = 0
    done = False
    if step and not args.no_target:
        # first search only for a solution at the LP bound rounded up to the
        # step; the cutoff lets HiGHS fix most arcs by reduced cost
        h.setOptionValue("solve_relaxation", True)
        h.run()
        h.setOptionValue("solve_relaxation", False)
        if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
            bound = h.getInfo().objective_function_value
            target = math.ceil(bound / step - 1e-6) * step
            run(target + step / 2)
            nodes += h.getInfo().mip_node_count
            # HiGHS may return a point above the cutoff and still call it
            # optimal; a point at the target is optimal by the bound alone
            done = (
                h.getInfo().primal_solution_status == 2
                and h.getInfo().objective_function_value <= target + step / 2
            )
    if not done:
        run(math.inf)
        nodes += h.getInfo().mip_node_count

    info = h.getInfo()
    status = highspy.HighsModelStatus.kOptimal if done else h.getModelStatus()
    if info.primal_solution_status != 2:  # kSolutionStatusFeasible
        print(f"no feasible solution: {h.modelStatusToString(status)}", file=sys.stderr)
        return 1
    values = h.getSolution().col_value
    with open(args.solution_file, "w") as fh:
        fh.write(f"# bb_nodes {nodes}\n")
        for name, x in zip(lp.col_names_, values):
            if abs(x) > 1e-9:
                fh.write(f"{name} {x:.10g}\n")
    return 0 if status == highspy.HighsModelStatus.kOptimal else 1


if __name__ == "__main__":
    sys.exit(main())
