"""``mvbp`` command line: solve, bench, gen, graph, validate."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import max_time, parse_classes, render_table, run_bench, to_csv
from .graph import export_dot, graph_to_json
from .instance import InstanceError, ParseError, generate_instance, read_instance, render_instance
from .model import emit_interchange
from .pipeline import StageError, build, run
from .solution import from_json, parse_text, render_text, to_json, validate
from .solver import OPTIMAL, BackendConfig, SOLVER_CMD_ENV

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _backend_args(p: argparse.ArgumentParser, default: str | None) -> None:
    p.add_argument(
        "--backend", choices=("external", "builtin", "oracle"), default=default,
        help="solver backend (default: external if a command is configured, else builtin)",
    )
    p.add_argument(
        "--solver-cmd",
        help=f"external command template with {{model_file}} and {{solution_file}}, "
        f"optionally {{start_file}} for a warm start "
        f"(or set ${SOLVER_CMD_ENV})",
    )
    p.add_argument("--time-limit", type=float, default=600.0, help="seconds per solve")
    p.add_argument("--node-limit", type=int, help="builtin branch-and-bound node limit")
    p.add_argument(
        "--exact-caps", action="store_true",
        help="build graphs whose paths never exceed item demands (larger graphs)",
    )


def _config(args) -> BackendConfig:
    kind = args.backend
    if kind is None:
        kind = "external" if (args.solver_cmd or BackendConfig().resolved_command()) else "builtin"
    return BackendConfig(
        kind=kind,
        command_template=args.solver_cmd,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
    )


def _load(path: str):
    try:
        return read_instance(path)
    except OSError as exc:
        raise SystemExit(_fail(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO))


def _fail(msg: str, code: int = EXIT_FAIL) -> int:
    print(f"mvbp: {msg}", file=sys.stderr)
    return code


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if args.emit_model:
        _, _, model = build(inst, args.exact_caps)
        Path(args.emit_model).write_text(emit_interchange(model))
        print(f"model written to {args.emit_model}")
        return EXIT_OK
    res = run(inst, _config(args), exact_caps=args.exact_caps)
    rep, st = res.report, res.stats
    print(f"status {rep.status}")
    if rep.status != OPTIMAL:
        print(rep.message)
        return EXIT_FAIL
    sol = res.solution
    print(f"cost {sol.total_cost}")
    print(f"bins {len(sol.bins)}")
    print(render_text(sol), end="")
    print(
        f"graph #v={st.num_vertices} #a={st.num_arcs} %v={st.pct_vertices_removed:.1f} "
        f"%a={st.pct_arcs_removed:.1f}  n^bb={rep.bb_nodes}  "
        f"t^ip={rep.time_model:.3f}s t^tot={rep.time_total:.3f}s"
    )
    if args.out:
        text = to_json(sol) if args.out.endswith(".json") else render_text(sol)
        Path(args.out).write_text(text)
    if not res.validation:
        for v in res.validation.violations:
            print(f"invalid: {v}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_bench(args) -> int:
    classes = parse_classes(args.classes)
    rows, records = run_bench(
        classes, seeds=args.seeds, base_seed=args.seed, config=_config(args),
        exact_caps=args.exact_caps, workers=args.workers,
    )
    print(render_table(rows), end="")
    print(f"max instance time {max_time(records):.2f}s over {len(records)} instances")
    if args.out:
        Path(args.out).write_text(to_csv(rows))
    if args.instances_out:
        Path(args.instances_out).write_text(to_csv(records))
    return EXIT_OK if all(r.solved == r.instances for r in rows) else EXIT_FAIL


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for X, q, n in parse_classes(args.classes):
        for s in range(args.seeds):
            inst = generate_instance(X, q, n, args.seed + s)
            (out / f"{inst.name}.txt").write_text(render_instance(inst))
            count += 1
    print(f"{count} instances written to {out}")
    return EXIT_OK


def cmd_graph(args) -> int:
    inst = _load(args.instance)
    graph, st, _ = build(inst, args.exact_caps)
    print(f"before  #v={st.vertices_before} #a={st.arcs_before}")
    print(f"after   #v={st.num_vertices} #a={st.num_arcs}")
    print(f"removed %v={st.pct_vertices_removed:.1f} %a={st.pct_arcs_removed:.1f}")
    if args.dot:
        Path(args.dot).write_text(export_dot(graph))
    if args.json:
        Path(args.json).write_text(graph_to_json(graph))
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    try:
        text = Path(args.solution).read_text()
    except OSError as exc:
        return _fail(f"cannot read {args.solution}: {exc.strerror or exc}", EXIT_IO)
    sol = from_json(text) if text.lstrip().startswith("{") else parse_text(text, inst)
    report = validate(sol, inst)
    if report:
        print(f"valid: {len(sol.bins)} bins, cost {sol.total_cost}")
        return EXIT_OK
    for v in report.violations:
        print(f"invalid: {v}")
    return EXIT_FAIL


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvbp", description="Exact arc-flow MVBP solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance file")
    p.add_argument("instance")
    _backend_args(p, None)
    p.add_argument("--out", help="write the solution (.json for JSON, text otherwise)")
    p.add_argument("--emit-model", metavar="FILE", help="write the LP model and skip solving")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run generated benchmark classes")
    p.add_argument("--classes", default="all", help="X/q/n list, '*' wildcards (default: all)")
    p.add_argument("--seeds", type=int, default=10, help="instances per class")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV file for the class table")
    p.add_argument("--instances-out", help="CSV file with one row per instance")
    _backend_args(p, None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write generated instances")
    p.add_argument("--classes", default="all")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("graph", help="graph statistics and exports")
    p.add_argument("instance")
    p.add_argument("--dot", help="write DOT")
    p.add_argument("--json", help="write JSON")
    p.add_argument("--exact-caps", action="store_true")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("validate", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ParseError as exc:
        return _fail(f"parse error: {exc}")
    except InstanceError as exc:
        return _fail(f"instance: {exc}")
    except StageError as exc:
        return _fail(f"stage {exc}")
    except ValueError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
