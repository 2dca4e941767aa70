"""Benchmark harness over generated variable-sized bin packing classes."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .instance import generate_instance
from .pipeline import StageError, run
from .solver import OPTIMAL, BackendConfig

GRID_N = (25, 50, 100, 200, 500)
GRID_Q = (3, 5)
GRID_X = (1, 2, 3)
NEEDS_EXTERNAL = "requires external solver"


@dataclass
class InstanceRecord:
    name: str
    X: int
    q: int
    n: int
    m: int
    status: str
    objective: str
    v: int
    a: int
    pct_v: float
    pct_a: float
    bb_nodes: int
    t_ip: float
    t_tot: float
    error: str = ""


@dataclass
class BenchRow:
    X: int
    q: int
    n: int
    m: float
    v: float
    a: float
    pct_v: float
    pct_a: float
    bb_nodes: float
    t_ip: float
    t_tot: float
    instances: int
    solved: int
    note: str = ""


def default_grid() -> list[tuple[int, int, int]]:
    return list(itertools.product(GRID_X, GRID_Q, GRID_N))


def parse_classes(spec: str) -> list[tuple[int, int, int]]:
    """``"X/q/n,..."`` with ``*`` wildcards, e.g. ``"3/3/*"``; ``"all"`` is the full grid."""
    if spec.strip() in ("", "all"):
        return default_grid()
    out = []
    for part in spec.split(","):
        bits = part.strip().split("/")
        if len(bits) != 3:
            raise ValueError(f"class {part!r} is not X/q/n")
        choices = []
        for tok, allowed in zip(bits, (GRID_X, GRID_Q, None)):
            if tok == "*":
                if allowed is None:
                    choices.append(GRID_N)
                else:
                    choices.append(allowed)
                continue
            val = int(tok)
            if allowed is not None and val not in allowed:
                raise ValueError(f"class {part!r}: {val} not in {allowed}")
            if allowed is None and val < 1:
                raise ValueError(f"class {part!r}: n must be positive")
            choices.append((val,))
        out.extend(itertools.product(*choices))
    return out


def run_instance(
    X: int, q: int, n: int, seed: int, config: BackendConfig, exact_caps: bool = False
) -> InstanceRecord:
    inst = generate_instance(X, q, n, seed)
    rec = InstanceRecord(inst.name, X, q, n, inst.m, "error", "", 0, 0, 0.0, 0.0, 0, 0.0, 0.0)
    try:
        res = run(inst, config, exact_caps=exact_caps)
    except StageError as exc:
        rec.error = str(exc)
        return rec
    st, rep = res.stats, res.report
    rec.v, rec.a = st.num_vertices, st.num_arcs
    rec.pct_v, rec.pct_a = st.pct_vertices_removed, st.pct_arcs_removed
    rec.status, rec.bb_nodes = rep.status, rep.bb_nodes
    rec.t_ip, rec.t_tot = rep.time_model, rep.time_total
    if rep.objective is not None:
        rec.objective = str(rep.objective)
    if rep.status != OPTIMAL:
        rec.error = rep.message
    elif not res.validation:
        rec.status = "error"
        rec.error = "; ".join(res.validation.violations)
    return rec


def _job(args):
    return run_instance(*args)


def run_bench(
    classes: list[tuple[int, int, int]],
    seeds: int = 10,
    base_seed: int = 0,
    config: BackendConfig | None = None,
    exact_caps: bool = False,
    workers: int = 1,
) -> tuple[list[BenchRow], list[InstanceRecord]]:
    config = config or default_config()
    jobs = [
        (X, q, n, base_seed + s, config, exact_caps)
        for X, q, n in classes
        for s in range(seeds)
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_job, jobs))
    else:
        records = [_job(j) for j in jobs]
    rows = []
    for k, (X, q, n) in enumerate(classes):
        rows.append(aggregate(X, q, n, records[k * seeds : (k + 1) * seeds]))
    return rows, records


def aggregate(X: int, q: int, n: int, records: list[InstanceRecord]) -> BenchRow:
    ok = [r for r in records if r.status == OPTIMAL]
    built = [r for r in records if r.v]

    def mean(rs, attr):
        return float(np.mean([getattr(r, attr) for r in rs])) if rs else float("nan")

    note = ""
    if len(ok) < len(records):
        if any("external" in r.error for r in records):
            note = NEEDS_EXTERNAL
        else:
            note = f"partial: {len(records) - len(ok)} failed"
    return BenchRow(
        X, q, n,
        mean(records, "m"), mean(built, "v"), mean(built, "a"),
        mean(built, "pct_v"), mean(built, "pct_a"),
        mean(ok, "bb_nodes"), mean(ok, "t_ip"), mean(ok, "t_tot"),
        len(records), len(ok), note,
    )


def default_config() -> BackendConfig:
    ext = BackendConfig(kind="builtin").resolved_command()
    return BackendConfig(kind="external" if ext else "builtin")


_COLUMNS = [
    ("X", "X", "{}"), ("q", "q", "{}"), ("n", "n", "{}"), ("m", "m", "{:.1f}"),
    ("#v", "v", "{:.1f}"), ("#a", "a", "{:.1f}"), ("%v", "pct_v", "{:.1f}"),
    ("%a", "pct_a", "{:.1f}"), ("n^bb", "bb_nodes", "{:.1f}"), ("t^ip", "t_ip", "{:.2f}"),
    ("t^tot", "t_tot", "{:.2f}"), ("inst", "instances", "{}"), ("solved", "solved", "{}"),
]


def render_table(rows: list[BenchRow]) -> str:
    head = [c[0] for c in _COLUMNS] + ["note"]
    body = [[fmt.format(getattr(r, attr)) for _, attr, fmt in _COLUMNS] + [r.note] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = []
    for cells in [head, *body]:
        line = "  ".join(c.rjust(w) for c, w in zip(cells[:-1], widths)) + "  " + cells[-1]
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"


def to_csv(items: list) -> str:
    if not items:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=[f.name for f in fields(items[0])], lineterminator="\n")
    w.writeheader()
    for it in items:
        w.writerow(asdict(it))
    return buf.getvalue()


def max_time(records: list[InstanceRecord]) -> float:
    return max((r.t_tot for r in records if r.status == OPTIMAL), default=0.0)

