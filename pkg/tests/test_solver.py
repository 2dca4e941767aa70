import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest
from conftest import random_instance

from mvbp.graph import build_graph, compress_final
from mvbp.instance import InfeasibleInstanceError, generate_instance, make_instance
from mvbp.model import assemble, evaluate_rows, objective_value
from mvbp.solver import (
    LIMIT,
    OPTIMAL,
    SOLVER_CMD_ENV,
    BackendConfig,
    InvalidSolutionError,
    OracleRefused,
    SolutionFormatError,
    lp_relaxation,
    rounding_heuristic,
    solve,
    solve_oracle,
)

RUNNER = Path(__file__).resolve().parents[1] / "scripts" / "highs_lp_solve.py"


def model_of(inst, exact_caps=True):
    g, _ = compress_final(build_graph(inst, exact_caps), exact_caps)
    return assemble(g, inst)


def fake_solver(tmp_path, body: str, exit_code: int = 0) -> str:
    """Command template for a script that writes ``body`` as the solution."""
    script = tmp_path / "fake.py"
    script.write_text(
        "import sys\n"
        f"open(sys.argv[2], 'w').write({body!r})\n"
        f"sys.exit({exit_code})\n"
    )
    return f"{sys.executable} {script} {{model_file}} {{solution_file}}"


def optimum_lines(model) -> str:
    rep = solve(model, BackendConfig(kind="builtin"))
    return "".join(f"{model.vars[k].name} {x}\n" for k, x in enumerate(rep.values) if x)


# --- oracle ---------------------------------------------------------------


def test_oracle_example1(ex1):
    res = solve_oracle(ex1)
    assert res.cost == 5
    assert sorted(res.bins) == [(1, ((1, 1), (2, 2))), (2, ((1, 1),))]


def test_oracle_one_item_two_incarnations():
    inst = make_instance([(100, 75), (75, 50)], [3, 2], [(1, [(75, 50), (25, 25)])])
    assert solve_oracle(inst).cost == 2


def test_oracle_single_pattern():
    inst = make_instance([(1,)], [7], [(1, [(1,)])])
    assert solve_oracle(inst).cost == 7


def test_oracle_size_guard():
    inst = make_instance([(100,)], [1], [(11, [(1,)])])
    with pytest.raises(OracleRefused):
        solve_oracle(inst)


def test_oracle_no_items():
    inst = make_instance([(10,)], [1], [])
    assert solve_oracle(inst).cost == 0


# --- builtin --------------------------------------------------------------


def test_builtin_example1(ex1):
    rep = solve(model_of(ex1), BackendConfig(kind="builtin"))
    assert rep.status == OPTIMAL and rep.objective == 5 and rep.z == 2


def test_builtin_single_pattern():
    inst = make_instance([(1,)], [7], [(1, [(1,)])])
    rep = solve(model_of(inst), BackendConfig(kind="builtin"))
    assert (rep.objective, rep.z) == (7, 1)
    assert rep.bb_nodes <= 1


def test_builtin_rational_costs():
    inst = make_instance([(10,), (6,)], [Fraction(5, 2), Fraction(4, 3)], [(3, [(5,)])])
    rep = solve(model_of(inst), BackendConfig(kind="builtin"))
    assert rep.objective == solve_oracle(inst).cost == Fraction(23, 6)


@pytest.mark.parametrize("seed", range(4))
def test_builtin_matches_oracle(seed):
    rng = random.Random(seed)
    for _ in range(50):
        inst = random_instance(rng, max_units=8, max_dims=2)
        want = solve_oracle(inst).cost
        for exact in (True, False):
            m = model_of(inst, exact)
            rep = solve(m, BackendConfig(kind="builtin"))
            assert rep.status == OPTIMAL and rep.objective == want
            assert rep.z == sum(rep.values[k] for k in m.sink_arcs().values())


def test_builtin_limits():
    inst = make_instance([(100,)], [1], [(60, [(1,)]), (60, [(2,)]), (60, [(3,)])])
    rep = solve(model_of(inst), BackendConfig(kind="builtin", pattern_cap=50))
    assert rep.status == LIMIT and "external" in rep.message
    inst = make_instance([(10,), (7,)], [10, 7], [(3, [(4,)]), (2, [(3,)]), (2, [(6,)])])
    rep = solve(model_of(inst), BackendConfig(kind="builtin", node_limit=0))
    assert rep.status == LIMIT


def test_lp_sandwich(ex1):
    rng = random.Random(11)
    for inst in [ex1] + [random_instance(rng) for _ in range(30)]:
        m = model_of(inst)
        rep = solve(m, BackendConfig(kind="builtin"))
        assert lp_relaxation(m) <= float(rep.objective) + 1e-7


def test_oracle_backend_flows(ex1):
    rep = solve(model_of(ex1), BackendConfig(kind="oracle"))
    assert rep.status == OPTIMAL and rep.objective == 5
    big = make_instance([(100,)], [1], [(11, [(1,)])])
    assert solve(model_of(big), BackendConfig(kind="oracle")).status == LIMIT


def test_verified_objective_and_z(ex1):
    m = model_of(ex1)
    rep = solve(m, BackendConfig(kind="builtin"))
    sinks = m.sink_arcs()
    assert rep.z == sum(rep.values[k] for k in sinks.values())
    assert rep.objective == sum(ex1.bin(t).cost * rep.values[k] for t, k in sinks.items())


# --- external -------------------------------------------------------------


def test_external_needs_command(monkeypatch):
    monkeypatch.delenv(SOLVER_CMD_ENV, raising=False)
    with pytest.raises(ValueError):
        BackendConfig(kind="external")
    monkeypatch.setenv(SOLVER_CMD_ENV, "true")
    assert BackendConfig(kind="external").resolved_command() == "true"


def test_external_accepts_nonzero_lines(ex1, tmp_path):
    m = model_of(ex1)
    cmd = fake_solver(tmp_path, "# bb_nodes 3\n" + optimum_lines(m))
    rep = solve(m, BackendConfig(kind="external", command_template=cmd))
    assert rep.status == OPTIMAL and rep.objective == 5 and rep.bb_nodes == 3


def test_external_conservation_violation(ex1, tmp_path):
    m = model_of(ex1)
    lines = optimum_lines(m).splitlines()
    first = lines[0].split()[0]  # the S -> S_t connector
    body = "\n".join(f"{first} 5" if ln.startswith(first + " ") else ln for ln in lines)
    cmd = fake_solver(tmp_path, body)
    with pytest.raises(InvalidSolutionError, match=r"invalid solution.*cons_0"):
        solve(m, BackendConfig(kind="external", command_template=cmd))


def test_external_empty_file(ex1, tmp_path):
    cmd = fake_solver(tmp_path, "")
    with pytest.raises(InvalidSolutionError, match="dem_"):
        solve(model_of(ex1), BackendConfig(kind="external", command_template=cmd))


@pytest.mark.parametrize(
    "body, err, fragment",
    [
        ("z 2\nbogus 1\n", SolutionFormatError, "line 2"),
        ("z 2 3\n", SolutionFormatError, "line 1"),
        ("z two\n", SolutionFormatError, "line 1"),
        ("z 1.5\n", InvalidSolutionError, "not integral"),
    ],
)
def test_external_bad_lines(ex1, tmp_path, body, err, fragment):
    cmd = fake_solver(tmp_path, body)
    with pytest.raises(err, match=fragment):
        solve(model_of(ex1), BackendConfig(kind="external", command_template=cmd))


def test_external_tolerates_rounding(ex1, tmp_path):
    m = model_of(ex1)
    body = "".join(
        f"{ln.split()[0]} {int(ln.split()[1]) - 3e-7}\n" for ln in optimum_lines(m).splitlines()
    )
    rep = solve(m, BackendConfig(kind="external", command_template=fake_solver(tmp_path, body)))
    assert rep.objective == 5


def test_external_failures_are_limits(ex1, tmp_path):
    m = model_of(ex1)
    script = tmp_path / "crash.py"
    script.write_text("import sys\nsys.stderr.write('licence expired\\n')\nsys.exit(3)\n")
    rep = solve(m, BackendConfig(kind="external", command_template=f"{sys.executable} {script}"))
    assert rep.status == LIMIT and "licence expired" in rep.message
    slow = tmp_path / "slow.py"
    slow.write_text("import time\ntime.sleep(30)\n")
    rep = solve(
        m, BackendConfig(kind="external", command_template=f"{sys.executable} {slow}", time_limit=0.5)
    )
    assert rep.status == LIMIT
    rep = solve(m, BackendConfig(kind="external", command_template="/nonexistent/solver"))
    assert rep.status == LIMIT
    partial = fake_solver(tmp_path, optimum_lines(m), exit_code=1)
    rep = solve(m, BackendConfig(kind="external", command_template=partial))
    assert rep.status == LIMIT and rep.objective == 5


@pytest.mark.skipif(
    not __import__("importlib").util.find_spec("highspy"), reason="highspy not installed"
)
@pytest.mark.parametrize("extra", ["", " --start {start_file}", " --no-target"])
def test_highs_runner_matches_oracle(ex1, extra):
    cmd = f"{sys.executable} {RUNNER} {{model_file}} {{solution_file}}" + extra
    rng = random.Random(5)
    for inst in [ex1] + [random_instance(rng) for _ in range(15)]:
        rep = solve(model_of(inst), BackendConfig(kind="external", command_template=cmd))
        assert rep.status == OPTIMAL
        assert rep.objective == solve_oracle(inst).cost


def test_unfittable_item_is_caught_upstream():
    with pytest.raises(InfeasibleInstanceError):
        make_instance([(10,)], [1], [(1, [(11,)])])


def test_rounding_heuristic_is_feasible():
    rng = random.Random(8)
    for inst in [random_instance(rng) for _ in range(30)] + [generate_instance(1, 5, 50, 0)]:
        m = model_of(inst)
        values = rounding_heuristic(m)
        assert values is not None and not evaluate_rows(m, values)
        assert objective_value(m, values) >= lp_relaxation(m) - 1e-6


def test_start_file_is_written(ex1, tmp_path):
    # a "solver" that just returns the warm start it was handed
    m = model_of(ex1)
    script = tmp_path / "echo_start.py"
    script.write_text("import shutil, sys\nshutil.copy(sys.argv[2], sys.argv[1])\n")
    cmd = f"{sys.executable} {script} {{solution_file}} {{start_file}}"
    rep = solve(m, BackendConfig(kind="external", command_template=cmd))
    assert rep.values is not None and not evaluate_rows(m, rep.values)
    assert rep.objective >= 5
