"""Backends that solve the arc-flow model to proven optimality.

* ``external``: writes the model in LP format, runs a user-supplied command
  (``{model_file}`` and ``{solution_file}`` placeholders) and reads back
  ``name value`` lines. An optional ``{start_file}`` placeholder receives a
  feasible point from LP residual rounding, for solvers that accept one.
* ``builtin``: branch-and-bound over pattern multiplicities, patterns read
  off the graph, LP bounds from scipy's HiGHS wrapper.
* ``oracle``: exhaustive search over item-to-bin assignments, independent
  of the graph; only for tiny instances.

Every backend's answer is mapped to integral arc flows and verified row by
row in exact arithmetic before it is reported as optimal.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .graph import PatternLimitError, pattern_paths
from .instance import Instance, fits
from .model import FlowModel, emit_interchange, evaluate_rows, objective_value

#: environment variable overriding the external command template
SOLVER_CMD_ENV = "MVBP_SOLVER_CMD"

OPTIMAL, INFEASIBLE, LIMIT = "optimal", "infeasible", "limit"
INTEGRALITY_TOL = 1e-6


class InvalidSolutionError(RuntimeError):
    """A backend returned values that violate the model."""


class SolutionFormatError(ValueError):
    pass


@dataclass
class BackendConfig:
    kind: str = "builtin"
    command_template: str | None = None
    time_limit: float = 600.0
    node_limit: int | None = None
    pattern_cap: int = 10**5

    def __post_init__(self) -> None:
        if self.kind not in ("external", "builtin", "oracle"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.kind == "external" and not self.resolved_command():
            raise ValueError(
                f"external backend needs a command template (or ${SOLVER_CMD_ENV})"
            )

    def resolved_command(self) -> str | None:
        return self.command_template or os.environ.get(SOLVER_CMD_ENV) or None


@dataclass
class SolveReport:
    status: str
    objective: Fraction | None = None
    values: list[int] | None = None
    z: int | None = None
    bb_nodes: int = 0
    time_model: float = 0.0
    time_total: float = 0.0
    message: str = ""
    backend: str = ""

    @property
    def flows(self) -> dict[int, int]:
        """Arc index -> positive flow."""
        if self.values is None:
            return {}
        return {k: x for k, x in enumerate(self.values[:-1]) if x}


def verify(model: FlowModel, values: list[int]) -> None:
    if len(values) != len(model.vars):
        raise InvalidSolutionError(
            f"backend returned invalid solution: {len(values)} values for {len(model.vars)} variables"
        )
    problems = evaluate_rows(model, values)
    if problems:
        shown = "; ".join(problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise InvalidSolutionError(f"backend returned invalid solution: {shown}{more}")


def _finish(model: FlowModel, values: list[int], status: str, **kw) -> SolveReport:
    verify(model, values)
    return SolveReport(
        status=status,
        objective=objective_value(model, values),
        values=values,
        z=values[model.z_index],
        **kw,
    )


def solve(model: FlowModel, config: BackendConfig | None = None) -> SolveReport:
    config = config or BackendConfig()
    t0 = time.perf_counter()
    if config.kind == "external":
        report = solve_external(model, config)
    elif config.kind == "builtin":
        report = solve_builtin(model, config)
    else:
        report = _solve_with_oracle(model, config)
    report.time_model = time.perf_counter() - t0
    report.time_total = report.time_model
    report.backend = config.kind
    return report


# ---------------------------------------------------------------------------
# external


def parse_solution(text: str, model: FlowModel) -> tuple[list[int], dict[str, str]]:
    """Read ``name value`` lines; unlisted variables are zero.

    ``# key value`` comment lines are returned as metadata.
    """
    index = model.index()
    values = [0] * len(model.vars)
    meta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2:
                meta[parts[0]] = parts[1]
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionFormatError(f"solution line {lineno}: expected 'name value', got {raw!r}")
        name, val = parts
        if name not in index:
            raise SolutionFormatError(f"solution line {lineno}: unknown variable {name!r}")
        try:
            x = float(val)
        except ValueError:
            raise SolutionFormatError(f"solution line {lineno}: bad value {val!r}") from None
        r = round(x)
        if abs(x - r) > INTEGRALITY_TOL:
            raise InvalidSolutionError(
                f"backend returned invalid solution: {name} = {x} is not integral"
            )
        values[index[name]] = int(r)
    return values, meta


def solve_external(model: FlowModel, config: BackendConfig) -> SolveReport:
    template = config.resolved_command()
    if not template:
        raise ValueError("no external solver command configured")
    with tempfile.TemporaryDirectory(prefix="mvbp-") as tmp:
        model_file = Path(tmp) / "model.lp"
        solution_file = Path(tmp) / "solution.txt"
        start_file = Path(tmp) / "start.txt"
        model_file.write_text(emit_interchange(model))
        if "{start_file}" in template:
            start = rounding_heuristic(model)
            start_file.write_text(
                "".join(f"{v.name} {x}\n" for v, x in zip(model.vars, start or []) if x)
            )
        cmd = template.format(
            model_file=model_file, solution_file=solution_file, start_file=start_file
        )
        try:
            proc = subprocess.run(
                shlex.split(cmd), capture_output=True, text=True, timeout=config.time_limit
            )
        except subprocess.TimeoutExpired:
            return SolveReport(LIMIT, message=f"external solver exceeded {config.time_limit}s")
        except OSError as exc:
            return SolveReport(LIMIT, message=f"external solver failed to start: {exc}")
        if not solution_file.exists():
            tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-3:]
            return SolveReport(
                LIMIT,
                message=f"external solver exited with {proc.returncode} and no solution: "
                + " | ".join(tail),
            )
        values, meta = parse_solution(solution_file.read_text(), model)
    status = OPTIMAL if proc.returncode == 0 else LIMIT
    return _finish(model, values, status, bb_nodes=int(float(meta.get("bb_nodes", 0))))


# ---------------------------------------------------------------------------
# builtin branch-and-bound over patterns


@dataclass
class _Columns:
    types: list[int]
    patterns: list[tuple[int, ...]]
    paths: dict[tuple[int, tuple[int, ...]], list[int]]
    cost: np.ndarray  # scaled to integers
    scale: Fraction  # true cost = scaled / scale
    step: int  # gcd of scaled costs
    matrix: np.ndarray  # items x columns


def _columns(model: FlowModel, cap: int) -> _Columns:
    graph, inst = model.graph, model.instance
    types, patterns, paths = [], [], {}
    total = 0
    for t in sorted(graph.type_targets):
        table = pattern_paths(graph, t, cap=cap)
        total += len(table)
        if total > cap:
            raise PatternLimitError(f"more than {cap} patterns; use an external backend")
        for pat, path in sorted(table.items()):
            paths[(t, pat)] = path
            if pat:
                types.append(t)
                patterns.append(pat)
    denom = math.lcm(*(bt.cost.denominator for bt in inst.bins))
    scaled = [int(inst.bin(t).cost * denom) for t in types]
    matrix = np.zeros((inst.m, len(patterns)))
    for k, pat in enumerate(patterns):
        for i, c in Counter(pat).items():
            matrix[i - 1, k] = c
    return _Columns(
        types, patterns, paths, np.array(scaled, dtype=float), Fraction(denom),
        math.gcd(*scaled) if scaled else 1, matrix,
    )


def _volume_bound(inst: Instance) -> Fraction:
    """Cost lower bound from each dimension's total minimum weight."""
    best = Fraction(0)
    for d in range(inst.dims):
        load = sum(it.demand * min(inc.weight[d] for inc in it.incarnations) for it in inst.items)
        if load == 0:
            continue
        rates = [bt.cost / bt.capacity[d] for bt in inst.bins if bt.capacity[d] > 0]
        if rates:
            best = max(best, load * min(rates))
    return best


def _round_bound(value: float, step: int) -> int:
    return step * math.ceil(value / step - 1e-7)


def solve_builtin(model: FlowModel, config: BackendConfig) -> SolveReport:
    inst = model.instance
    started = time.perf_counter()
    try:
        cols = _columns(model, config.pattern_cap)
    except PatternLimitError as exc:
        return SolveReport(LIMIT, message=str(exc))
    demand = np.array([it.demand for it in inst.items], dtype=float)
    n = len(cols.patterns)
    if inst.m == 0 or demand.sum() == 0:
        return _finish(model, [0] * len(model.vars), OPTIMAL)
    if n == 0:
        return SolveReport(INFEASIBLE, message="no non-empty pattern")

    best_val = math.inf
    best_x: np.ndarray | None = None
    root_floor = _volume_bound(inst) * cols.scale
    root_floor = cols.step * math.ceil(root_floor / cols.step) if root_floor else 0
    nodes = 0
    stack = [(np.zeros(n), np.full(n, np.inf))]
    status = OPTIMAL
    while stack:
        if config.node_limit is not None and nodes >= config.node_limit:
            status = LIMIT
            break
        if time.perf_counter() - started > config.time_limit:
            status = LIMIT
            break
        lb, ub = stack.pop()
        nodes += 1
        res = linprog(
            cols.cost, A_ub=-cols.matrix, b_ub=-demand,
            bounds=list(zip(lb, ub)), method="highs",
        )
        if res.status == 2:
            continue
        if res.status != 0:
            return SolveReport(LIMIT, message=f"LP failed: {res.message}", bb_nodes=nodes)
        bound = _round_bound(res.fun, cols.step)
        if nodes == 1:
            bound = max(bound, root_floor)
        if bound >= best_val:
            continue
        x = res.x
        # ceil-rounding stays feasible for covering rows
        up = np.ceil(x - INTEGRALITY_TOL)
        val = float(cols.cost @ up)
        if val < best_val - 0.5:
            best_val, best_x = val, up
        frac = np.abs(x - np.round(x)) > INTEGRALITY_TOL
        if not frac.any():
            continue
        if bound >= best_val:
            continue
        k = int(np.argmax(np.where(frac, x, -1.0)))
        lo_child = (lb, ub.copy())
        lo_child[1][k] = math.floor(x[k])
        hi_child = (lb.copy(), ub)
        hi_child[0][k] = math.ceil(x[k])
        stack.append(lo_child)
        stack.append(hi_child)
    if best_x is None:
        return SolveReport(status if status == LIMIT else INFEASIBLE, bb_nodes=nodes)
    values = _pattern_flows(model, cols, best_x)
    return _finish(model, values, status, bb_nodes=nodes)


def _pattern_flows(model: FlowModel, cols: _Columns, x: np.ndarray) -> list[int]:
    """Arc flows for a covering solution, with surplus item copies removed."""
    bins = []
    for k in np.flatnonzero(x > 0.5):
        bins.extend([[cols.types[k], list(cols.patterns[k])]] * int(round(x[k])))
    bins = [[t, list(p)] for t, p in bins]
    bins.sort(key=lambda b: (b[0], b[1]))
    surplus = Counter()
    for _, pat in bins:
        surplus.update(pat)
    for it in model.instance.items:
        surplus[it.index] -= it.demand
    for b in reversed(bins):
        for i in list(b[1]):
            if surplus[i] > 0:
                b[1].remove(i)
                surplus[i] -= 1
    return bins_to_flows(model, [(t, tuple(p)) for t, p in bins if p], cols.paths)


def find_pattern_path(graph, t: int, pattern: tuple[int, ...]) -> list[int] | None:
    """Arc indices of some ``S -> T_t`` path whose items are exactly ``pattern``."""
    end = graph.type_targets[t]
    out = graph.out_arcs()
    need = Counter(pattern)
    dead: set[tuple[int, tuple]] = set()

    def rec(v: int) -> list[int] | None:
        if v == end:
            return [] if not +need else None
        key = (v, tuple(sorted((+need).items())))
        if key in dead:
            return None
        for k in out[v]:
            a = graph.arcs[k]
            if a.item:
                if need[a.item] == 0:
                    continue
                need[a.item] -= 1
            rest = rec(a.head)
            if a.item:
                need[a.item] += 1
            if rest is not None:
                return [k, *rest]
        dead.add(key)
        return None

    return rec(graph.source)


def bins_to_flows(
    model: FlowModel,
    bins: list[tuple[int, tuple[int, ...]]],
    paths: dict[tuple[int, tuple[int, ...]], list[int]] | None = None,
) -> list[int]:
    """Route each ``(bin type, item pattern)`` along a path of the graph."""
    graph = model.graph
    paths = dict(paths or {})
    values = [0] * len(model.vars)
    t_arcs = {a.tail: k for k, a in enumerate(graph.arcs) if a.head == graph.target}
    for t, pat in bins:
        key = (t, tuple(sorted(pat)))
        if key not in paths:
            paths[key] = find_pattern_path(graph, t, key[1])
        path = paths[key]
        if path is None:
            raise InvalidSolutionError(f"pattern {pat} of bin type {t} has no path in the graph")
        for k in path:
            values[k] += 1
        # paths run from S to T_t; add the connector T_t -> T
        values[t_arcs[graph.type_targets[t]]] += 1
    values[model.z_index] = len(bins)
    return values


# ---------------------------------------------------------------------------
# oracle


@dataclass
class OracleResult:
    cost: Fraction
    bins: list[tuple[int, tuple[tuple[int, int], ...]]] = field(default_factory=list)


class OracleRefused(ValueError):
    pass


def solve_oracle(instance: Instance, max_units: int = 10) -> OracleResult:
    """Cheapest packing by exhaustive assignment of unit items to bins.

    Units of equal item type are interchangeable, so each unit goes to a bin
    with index no smaller than its predecessor's. Partial assignments whose
    cost already reaches the incumbent are cut; that keeps the search exact
    because costs are positive.
    """
    if instance.n > max_units:
        raise OracleRefused(f"oracle limited to {max_units} units, instance has {instance.n}")
    units = []
    for it in sorted(
        instance.items,
        key=lambda it: (-max(sum(inc.weight) for inc in it.incarnations), it.index),
    ):
        units.extend([it] * it.demand)
    bins_t: list[int] = []
    loads: list[list[int]] = []
    contents: list[list[tuple[int, int]]] = []
    best = [None, None]

    def cost_now() -> Fraction:
        return sum((instance.bin(t).cost for t in bins_t), Fraction(0))

    def rec(u: int, min_bin: int, cost: Fraction) -> None:
        if best[0] is not None and cost >= best[0]:
            return
        if u == len(units):
            best[0] = cost
            best[1] = [(t, tuple(sorted(c))) for t, c in zip(bins_t, contents)]
            return
        item = units[u]
        same_as_prev = u > 0 and units[u - 1] is item
        start = min_bin if same_as_prev else 0
        for b in range(start, len(bins_t)):
            cap = instance.bin(bins_t[b]).capacity
            for inc in item.incarnations:
                new = [x + w for x, w in zip(loads[b], inc.weight)]
                if fits(new, cap):
                    old = loads[b]
                    loads[b] = new
                    contents[b].append(inc.label)
                    rec(u + 1, b, cost)
                    contents[b].pop()
                    loads[b] = old
        for bt in instance.bins:
            for inc in item.incarnations:
                if fits(inc.weight, bt.capacity):
                    bins_t.append(bt.index)
                    loads.append(list(inc.weight))
                    contents.append([inc.label])
                    rec(u + 1, len(bins_t) - 1, cost + bt.cost)
                    bins_t.pop()
                    loads.pop()
                    contents.pop()

    rec(0, 0, Fraction(0))
    if best[0] is None:
        raise OracleRefused("no feasible packing")
    return OracleResult(best[0], best[1])


def _solve_with_oracle(model: FlowModel, config: BackendConfig) -> SolveReport:
    try:
        result = solve_oracle(model.instance)
    except OracleRefused as exc:
        return SolveReport(LIMIT, message=str(exc))
    bins = [(t, tuple(sorted(i for i, _ in c))) for t, c in result.bins]
    values = bins_to_flows(model, bins)
    report = _finish(model, values, OPTIMAL)
    if report.objective != result.cost:
        raise InvalidSolutionError("oracle packing and its flow disagree on cost")
    return report


# ---------------------------------------------------------------------------
# LP relaxation


def _matrices(model: FlowModel, demand: dict[int, int] | None):
    """Objective, row matrix, row bounds and variable upper bounds.

    ``demand`` replaces every demand row by a covering row with the given
    right-hand side and tightens item arc bounds to match.
    """
    nv = len(model.vars)
    c = np.zeros(nv)
    for k, v in model.objective.items():
        c[k] = float(v)
    n_cons = model.graph.num_nodes
    rows, cols, vals, lo, hi = [], [], [], [], []
    for r, row in enumerate(model.rows):
        sense, rhs = row.sense, row.rhs
        if demand is not None and r >= n_cons:
            sense, rhs = ">=", demand[model.instance.items[r - n_cons].index]
        for k, coef in row.terms:
            rows.append(r), cols.append(k), vals.append(coef)
        lo.append(rhs)
        hi.append(rhs if sense == "=" else np.inf)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(len(model.rows), nv))
    upper = np.full(nv, np.inf)
    for k, var in enumerate(model.vars):
        if var.upper is not None:
            upper[k] = var.upper
        if demand is not None and var.arc is not None and var.arc.item:
            upper[k] = min(upper[k], demand[var.arc.item])
    return c, a, np.array(lo, dtype=float), np.array(hi, dtype=float), upper


def lp_solution(
    model: FlowModel, demand: dict[int, int] | None = None
) -> tuple[float, np.ndarray]:
    """Optimal value and point of the model with integrality dropped.

    ``demand`` overrides the demand rows as in :func:`_matrices`.
    """
    c, a, lo, hi, upper = _matrices(model, demand)
    eq = lo == hi
    res = linprog(
        c,
        A_ub=-a[~eq] if (~eq).any() else None,
        b_ub=-lo[~eq] if (~eq).any() else None,
        A_eq=a[eq],
        b_eq=lo[eq],
        bounds=list(zip(np.zeros(len(c)), upper)),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return float(res.fun), res.x


def _residual_mip(model: FlowModel, demand: dict[int, int], node_limit: int) -> np.ndarray | None:
    """Integral flow covering ``demand``, from scipy's MILP under a node limit."""
    c, a, lo, hi, upper = _matrices(model, demand)
    res = milp(
        c,
        constraints=LinearConstraint(a, lo, hi),
        bounds=Bounds(0, upper),
        integrality=np.ones(len(c)),
        options={"node_limit": node_limit},
    )
    return None if res.x is None else np.round(res.x)


def lp_relaxation(model: FlowModel) -> float:
    """Optimal value of the model with integrality dropped."""
    return lp_solution(model)[0]


def _decompose(model: FlowModel, x: np.ndarray) -> list[tuple[int, list[int], float]]:
    """Split a fractional flow into ``(bin type, items, amount)`` paths."""
    graph = model.graph
    out = graph.out_arcs()
    residual = np.array(x[:-1], dtype=float)
    residual[residual < 1e-9] = 0.0
    paths = []
    while True:
        start = [k for k in out[graph.source] if residual[k] > 1e-9]
        if not start:
            break
        v, arcs = graph.source, []
        while v != graph.target:
            cand = [k for k in out[v] if residual[k] > 1e-9]
            if not cand:
                break
            k = max(cand, key=lambda k: (residual[k], -k))
            arcs.append(k)
            v = graph.arcs[k].head
        if v != graph.target:
            break
        amount = float(min(residual[k] for k in arcs))
        residual[arcs] -= amount
        residual[residual < 1e-9] = 0.0
        t = graph.arc_type(graph.arcs[arcs[-1]])
        paths.append((t, [graph.arcs[k].item for k in arcs if graph.arcs[k].item], amount))
    return paths


def rounding_heuristic(
    model: FlowModel, max_rounds: int = 500, tail_nodes: int = 200
) -> list[int] | None:
    """A feasible integral flow built by residual rounding, or None.

    Each round solves the LP for the demand still open, decomposes the flow
    into paths and fixes the whole multiples of every path (or one copy of
    the heaviest path when none is whole). Once the open demand is worth at
    most two of the dearest bins, it is finished two ways and the cheaper
    result kept: inserting units one by one where the cheapest fitting bin
    type grows least, and a small MILP over the open demand limited to
    ``tail_nodes`` branch-and-bound nodes.
    """
    inst = model.instance
    remaining = {it.index: it.demand for it in inst.items}
    bins: list[tuple[int, list[int]]] = []
    tail = 2 * max(bt.cost for bt in inst.bins)

    def take(t: int, items: list[int], copies: int) -> bool:
        added = False
        for _ in range(copies):
            kept = []
            for i in items:
                if remaining[i] > 0:
                    remaining[i] -= 1
                    kept.append(i)
            if not kept:
                break
            bins.append((t, kept))
            added = True
        return added

    for _ in range(max_rounds):
        if not any(remaining.values()):
            break
        try:
            value, x = lp_solution(model, remaining)
        except RuntimeError:
            return None
        if value <= tail:
            break
        paths = _decompose(model, x)
        progress = False
        for t, items, amount in paths:
            progress |= take(t, items, int(math.floor(amount + 1e-9)))
        if not progress:
            heavy = [p for p in paths if p[1]]
            if not heavy:
                break
            t, items, _ = max(heavy, key=lambda p: p[2])
            if not take(t, items, 1):
                break

    fixed = [(t, list(items)) for t, items in bins]
    left = dict(remaining)
    candidates = [_insert_units(inst, fixed, left)]
    if any(left.values()) and tail_nodes > 0:
        x = _residual_mip(model, left, tail_nodes)
        if x is not None:
            for t, items, amount in _decompose(model, x):
                take(t, items, int(round(amount)))
            if not any(remaining.values()):
                candidates.append([(_cheapest(inst, items), items) for _, items in bins])
    best = None
    for packed in candidates:
        if packed is None or any(bt is None for bt, _ in packed):
            continue
        try:
            values = bins_to_flows(
                model, [(bt.index, tuple(sorted(items))) for bt, items in packed]
            )
        except InvalidSolutionError:
            continue
        if not evaluate_rows(model, values) and (
            best is None or objective_value(model, values) < objective_value(model, best)
        ):
            best = values
    return best


def _insert_units(inst: Instance, bins: list[tuple[int, list[int]]], remaining: dict[int, int]):
    """Add the open units to ``bins`` where the cheapest fitting type grows least."""
    packed = [(_cheapest(inst, items), list(items)) for _, items in bins]
    if any(bt is None for bt, _ in packed):
        return None
    left = [it for it in inst.items for _ in range(remaining[it.index])]
    left.sort(key=lambda it: (-max(min(inc.weight) for inc in it.incarnations), it.index))
    for it in left:
        alone = _cheapest(inst, [it.index])
        if alone is None:
            return None
        best, best_delta = None, alone.cost
        for b, (bt, items) in enumerate(packed):
            grown = _cheapest(inst, items + [it.index])
            if grown is not None and grown.cost - bt.cost < best_delta:
                best, best_delta = b, grown.cost - bt.cost
        if best is None:
            packed.append((alone, [it.index]))
        else:
            items = packed[best][1] + [it.index]
            packed[best] = (_cheapest(inst, items), items)
    return packed


def _cheapest(inst: Instance, items: list[int]):
    """Cheapest bin type that holds ``items``, or None."""
    fitting = [bt for bt in inst.bins if _load(inst, bt.index, items) is not None]
    return min(fitting, key=lambda bt: (bt.cost, bt.index), default=None)


def _load(inst: Instance, t: int, items: list[int]) -> tuple | None:
    """Incarnation choice fitting ``items`` into bin type ``t``, or None."""
    cap = inst.bin(t).capacity
    order = sorted(items)

    def rec(k: int, load: tuple[int, ...]):
        if k == len(order):
            return ()
        for inc in sorted(inst.item(order[k]).incarnations, key=lambda inc: inc.weight):
            new = tuple(a + b for a, b in zip(load, inc.weight))
            if fits(new, cap):
                rest = rec(k + 1, new)
                if rest is not None:
                    return (inc.label, *rest)
        return None

    return rec(0, (0,) * inst.dims)
