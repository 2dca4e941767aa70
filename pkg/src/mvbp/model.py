"""Arc-flow integer program over a stitched pattern graph.

One integer variable per arc plus the circulation variable ``z`` (bins
used). Rows: flow conservation at every node (``S`` and ``T`` absorb
``-z``/``+z``), and one demand row per item, an equality for items in ``J``
and ``>=`` otherwise. Item arcs are bounded by the item demand; the
objective charges ``C(t)`` on each ``T_t -> T`` connector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .graph import Arc, ArcFlowGraph
from .instance import Instance


class InfeasibleModelError(ValueError):
    """Some demanded item has no arc in the graph."""


@dataclass(frozen=True)
class FlowVar:
    name: str
    arc: Arc | None  # None for z
    upper: int | None


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[int, int], ...]  # (variable index, coefficient)
    sense: str  # "=" or ">="
    rhs: int


@dataclass
class FlowModel:
    graph: ArcFlowGraph
    instance: Instance
    J: frozenset[int]
    vars: list[FlowVar]
    objective: dict[int, Fraction]
    rows: list[Row]

    @property
    def z_index(self) -> int:
        return len(self.vars) - 1

    def index(self) -> dict[str, int]:
        return {v.name: k for k, v in enumerate(self.vars)}

    def sink_arcs(self) -> dict[int, int]:
        """Bin type -> variable index of its ``T_t -> T`` connector."""
        out = {}
        for k, var in enumerate(self.vars):
            if var.arc is not None:
                t = self.graph.arc_type(var.arc)
                if t is not None:
                    out[t] = k
        return out


def default_J(instance: Instance) -> frozenset[int]:
    """Items whose demand rows are equalities: those with demand 1."""
    return frozenset(it.index for it in instance.items if it.demand == 1)


def var_name(graph: ArcFlowGraph, arc: Arc) -> str:
    return f"f_{arc.tail}_{arc.head}_{arc.item}_{arc.variant}"


def assemble(
    graph: ArcFlowGraph, instance: Instance, J: frozenset[int] | set[int] | None = None
) -> FlowModel:
    if not graph.stitched:
        raise ValueError("model needs a stitched graph with a super source and target")
    J = default_J(instance) if J is None else frozenset(J)
    if not J <= {it.index for it in instance.items}:
        raise ValueError(f"J contains unknown items: {sorted(J)}")
    covered = {a.item for a in graph.arcs}
    missing = [it.index for it in instance.items if it.index not in covered]
    if missing:
        raise InfeasibleModelError(f"items with no arc in the graph: {missing}")

    variables = [
        FlowVar(var_name(graph, a), a, instance.item(a.item).demand if a.item else None)
        for a in graph.arcs
    ]
    z = len(variables)
    variables.append(FlowVar("z", None, None))

    objective: dict[int, Fraction] = {}
    for k, a in enumerate(graph.arcs):
        t = graph.arc_type(a)
        if t is not None:
            objective[k] = instance.bin(t).cost

    flow: list[dict[int, int]] = [dict() for _ in graph.nodes]
    for k, a in enumerate(graph.arcs):
        flow[a.head][k] = flow[a.head].get(k, 0) + 1
        flow[a.tail][k] = flow[a.tail].get(k, 0) - 1
    rows = []
    for v in graph.nodes:
        terms = dict(flow[v])
        # inflow - outflow = -z at S, +z at T
        if v == graph.source:
            terms[z] = 1
        elif v == graph.target:
            terms[z] = -1
        rows.append(Row(f"cons_{v}", tuple(sorted(terms.items())), "=", 0))
    by_item: dict[int, list[int]] = {}
    for k, a in enumerate(graph.arcs):
        by_item.setdefault(a.item, []).append(k)
    for it in instance.items:
        terms = tuple((k, 1) for k in by_item[it.index])
        sense = "=" if it.index in J else ">="
        rows.append(Row(f"dem_{it.index}", terms, sense, it.demand))
    return FlowModel(graph, instance, J, variables, objective, rows)


def evaluate_rows(model: FlowModel, values: list[int]) -> list[str]:
    """Exact check of every row, bound and sign; returns violation messages."""
    problems = []
    for var, x in zip(model.vars, values):
        if x < 0:
            problems.append(f"{var.name} = {x} < 0")
        elif var.upper is not None and x > var.upper:
            problems.append(f"{var.name} = {x} exceeds bound {var.upper}")
    for row in model.rows:
        lhs = sum(c * values[k] for k, c in row.terms)
        ok = lhs == row.rhs if row.sense == "=" else lhs >= row.rhs
        if not ok:
            problems.append(f"row {row.name}: {lhs} {row.sense} {row.rhs} violated")
    return problems


def objective_value(model: FlowModel, values: list[int]) -> Fraction:
    return sum((c * values[k] for k, c in model.objective.items()), Fraction(0))


# ---------------------------------------------------------------------------
# output


def _num(c: Fraction | int) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else repr(float(c))


def _linear(model: FlowModel, terms) -> str:
    parts = []
    for k, c in terms:
        name = model.vars[k].name
        if c == 1:
            parts.append(f"+ {name}")
        elif c == -1:
            parts.append(f"- {name}")
        elif c < 0:
            parts.append(f"- {_num(-c)} {name}")
        else:
            parts.append(f"+ {_num(c)} {name}")
    text = " ".join(parts) if parts else "0 z"
    return text[2:] if text.startswith("+ ") else text


def _wrap(text: str, width: int = 200) -> list[str]:
    lines, line = [], ""
    for tok in text.split(" "):
        if line and len(line) + len(tok) + 1 > width and tok in "+-":
            lines.append(line)
            line = "   " + tok
        else:
            line = f"{line} {tok}" if line else tok
    lines.append(line)
    return lines


def emit_interchange(model: FlowModel) -> str:
    """CPLEX LP format text of the model."""
    out = [
        f"\\ arc-flow model: {model.graph.num_nodes} nodes, {len(model.graph.arcs)} arcs, "
        f"{model.instance.m} items",
        "Minimize",
    ]
    out.extend(" " + ln for ln in _wrap("obj: " + _linear(model, sorted(model.objective.items()))))
    out.append("Subject To")
    for row in model.rows:
        sense = "=" if row.sense == "=" else ">="
        text = f"{row.name}: {_linear(model, row.terms)} {sense} {row.rhs}"
        out.extend(" " + ln for ln in _wrap(text))
    out.append("Bounds")
    for var in model.vars:
        if var.upper is not None:
            out.append(f" 0 <= {var.name} <= {var.upper}")
        else:
            out.append(f" {var.name} >= 0")
    out.append("General")
    out.extend(" " + var.name for var in model.vars)
    out.append("End")
    return "\n".join(out) + "\n"


def model_to_json(model: FlowModel) -> str:
    doc = {
        "variables": [
            {"name": v.name, "upper": v.upper, "integer": True} for v in model.vars
        ],
        "objective": {model.vars[k].name: _num(c) for k, c in sorted(model.objective.items())},
        "rows": [
            {
                "name": r.name,
                "sense": r.sense,
                "rhs": r.rhs,
                "terms": {model.vars[k].name: c for k, c in r.terms},
            }
            for r in model.rows
        ],
        "J": sorted(model.J),
    }
    return json.dumps(doc, indent=1)
