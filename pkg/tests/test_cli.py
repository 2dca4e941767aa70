import csv
import json
import sys

import pytest
from conftest import EXAMPLE1

from mvbp.cli import main
from mvbp.instance import read_instance


@pytest.fixture
def ex1_path(tmp_path):
    path = tmp_path / "ex1.txt"
    path.write_text(EXAMPLE1)
    return path


def test_solve_example1(ex1_path, tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["solve", str(ex1_path), "--backend", "builtin", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "cost 5" in text and "bins 2" in text
    assert "1: (1,1) (2,2)" in text and "2: (1,1)" in text
    assert json.loads(out.read_text())["total_cost"] == "5"
    assert main(["validate", str(ex1_path), str(out)]) == 0


def test_solve_with_oracle_and_exact_caps(ex1_path, capsys):
    assert main(["solve", str(ex1_path), "--backend", "oracle", "--exact-caps"]) == 0
    assert "cost 5" in capsys.readouterr().out


def test_solve_external(ex1_path, capsys):
    pytest.importorskip("highspy")
    from test_solver import RUNNER

    cmd = f"{sys.executable} {RUNNER} {{model_file}} {{solution_file}}"
    assert main(["solve", str(ex1_path), "--backend", "external", "--solver-cmd", cmd]) == 0
    assert "cost 5" in capsys.readouterr().out


def test_unreadable_path(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.txt")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_parse_error_surfaces(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1\n1\n1 10\n0\n")
    assert main(["solve", str(bad)]) == 1
    assert "no items" in capsys.readouterr().err


def test_emit_model_skips_solving(ex1_path, tmp_path, capsys):
    lp = tmp_path / "m.lp"
    assert main(["solve", str(ex1_path), "--emit-model", str(lp)]) == 0
    out = capsys.readouterr().out
    assert "cost" not in out
    assert lp.read_text().startswith("\\") and "General" in lp.read_text()


def test_limit_exits_nonzero(ex1_path, capsys):
    assert main(["solve", str(ex1_path), "--backend", "builtin", "--node-limit", "0"]) == 1
    assert "status limit" in capsys.readouterr().out


def test_graph_stats_and_dot(ex1_path, tmp_path, capsys):
    dot1, dot2 = tmp_path / "a.dot", tmp_path / "b.dot"
    assert main(["graph", str(ex1_path), "--dot", str(dot1), "--json", str(tmp_path / "g.json")]) == 0
    out = capsys.readouterr().out
    assert "removed %v=" in out
    pct = float(out.split("%v=")[1].split()[0])
    assert pct > 0
    main(["graph", str(ex1_path), "--dot", str(dot2)])
    assert dot1.read_bytes() == dot2.read_bytes()


def test_graph_single_item(tmp_path, capsys):
    path = tmp_path / "one.txt"
    path.write_text("1\n1\n1 1\n1\n1 1\n 1\n")
    assert main(["graph", str(path)]) == 0
    assert "after" in capsys.readouterr().out


def test_validate_detects_problems(ex1_path, tmp_path, capsys):
    sol = tmp_path / "sol.txt"
    sol.write_text("1: (1,1) (2,2)\n")
    assert main(["validate", str(ex1_path), str(sol)]) == 1
    assert "demand of item 1: 1 < 2" in capsys.readouterr().out
    sol.write_text("1: (1,1) (2,1)\n2: (1,1)\n")
    assert main(["validate", str(ex1_path), str(sol)]) == 1
    assert "dimension 1" in capsys.readouterr().out


def test_gen_and_bench(tmp_path, capsys):
    assert main(["gen", "--classes", "3/3/25", "--seeds", "2", "--out", str(tmp_path / "g")]) == 0
    files = sorted((tmp_path / "g").iterdir())
    assert [f.name for f in files] == ["X3_q3_n25_s0.txt", "X3_q3_n25_s1.txt"]
    assert read_instance(files[0]).n == 25
    capsys.readouterr()
    rows = tmp_path / "rows.csv"
    code = main([
        "bench", "--classes", "3/3/25", "--seeds", "1", "--backend", "builtin",
        "--out", str(rows), "--instances-out", str(tmp_path / "inst.csv"),
    ])
    assert code == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split()[:4] == ["X", "q", "n", "m"]
    assert len([ln for ln in table if ln.startswith("3  3")]) == 1
    recs = list(csv.DictReader(rows.open()))
    assert len(recs) == 1 and recs[0]["solved"] == "1"


def test_bench_rejects_bad_class(capsys):
    assert main(["bench", "--classes", "4/3/25", "--backend", "builtin"]) == 1
