"""Turn optimal arc flows into bins with concrete item incarnations."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import ArcFlowGraph, psi_labels
from .instance import LOSS, Instance, fits
from .model import default_J
from .solver import SolveReport


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bin:
    bin_type: int
    contents: tuple[tuple[int, int], ...]  # sorted (item, incarnation) labels


@dataclass
class PackingSolution:
    bins: list[Bin]
    total_cost: Fraction
    fingerprint: str = ""


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _restore(instance: Instance, t: int, items: list[int]) -> tuple[tuple[int, int], ...]:
    """Pick one incarnation per unit so the bin fits; lex-smallest weights first.

    Depth-first with first fit, so the result is the lexicographically first
    feasible assignment over units sorted by item.
    """
    cap = instance.bin(t).capacity
    options = [
        sorted(instance.item(i).incarnations, key=lambda inc: (inc.weight, inc.variant))
        for i in items
    ]
    chosen: list[tuple[int, int]] = []

    def rec(k: int, load: tuple[int, ...]) -> bool:
        if k == len(items):
            return True
        for inc in options[k]:
            new = tuple(a + b for a, b in zip(load, inc.weight))
            if fits(new, cap):
                chosen.append(inc.label)
                if rec(k + 1, new):
                    return True
                chosen.pop()
        return False

    if not rec(0, (0,) * instance.dims):
        raise ExtractionError(
            f"incarnation restoration failed for items {items} in a bin of type {t}"
        )
    return tuple(sorted(chosen))


def _peel(graph: ArcFlowGraph, flows: dict[int, int], z: int) -> list[tuple[int, list[int]]]:
    labels = graph.node_labels or psi_labels(graph)
    residual = dict(flows)
    out = graph.out_arcs()
    for v in graph.nodes:
        out[v] = sorted(
            out[v], key=lambda k: (labels[graph.arcs[k].head], graph.arcs[k].item, k)
        )
    paths = []
    for _ in range(z):
        v, items, t = graph.source, [], None
        while v != graph.target:
            nxt = next((k for k in out[v] if residual.get(k, 0) > 0), None)
            if nxt is None:
                raise ExtractionError(f"flow is not decomposable: stuck at node {v}")
            residual[nxt] -= 1
            a = graph.arcs[nxt]
            if a.item:
                items.append(a.item)
            if a.head == graph.target:
                t = graph.arc_type(a)
            v = a.head
        paths.append((t, sorted(items)))
    left = {k: x for k, x in residual.items() if x}
    if left:
        raise ExtractionError(f"flow is not decomposable: {len(left)} arcs keep residual flow")
    return paths


def extract(graph: ArcFlowGraph, report: SolveReport, instance: Instance) -> PackingSolution:
    """Decompose the reported flow into exactly ``z`` bins.

    Copies of an item beyond its demand within a single bin are dropped;
    they can only arise from graphs built with relaxed demand caps.
    """
    if report.values is None or report.z is None:
        raise ExtractionError(f"no flow to extract (status {report.status})")
    bins = []
    for t, items in _peel(graph, report.flows, report.z):
        counts = Counter(items)
        kept = []
        for i in sorted(counts):
            kept.extend([i] * min(counts[i], instance.item(i).demand))
        bins.append(Bin(t, _restore(instance, t, kept)))
    bins.sort(key=lambda b: (b.bin_type, b.contents))
    total = sum((instance.bin(b.bin_type).cost for b in bins), Fraction(0))
    if report.objective is not None and total != report.objective:
        raise ExtractionError(f"extracted cost {total} differs from objective {report.objective}")
    return PackingSolution(bins, total, instance.fingerprint())


def validate(
    solution: PackingSolution, instance: Instance, J: frozenset[int] | set[int] | None = None
) -> ValidationReport:
    J = default_J(instance) if J is None else frozenset(J)
    problems = []
    counts: Counter[int] = Counter()
    cost = Fraction(0)
    for n, b in enumerate(solution.bins, 1):
        if not 1 <= b.bin_type <= instance.q:
            problems.append(f"bin {n}: unknown bin type {b.bin_type}")
            continue
        bt = instance.bin(b.bin_type)
        cost += bt.cost
        load = [0] * instance.dims
        for label in b.contents:
            i, j = label
            if label == LOSS or not 1 <= i <= instance.m or not 1 <= j <= len(
                instance.item(i).incarnations
            ):
                problems.append(f"bin {n}: no incarnation ({i},{j})")
                continue
            counts[i] += 1
            for d, w in enumerate(instance.weight(label)):
                load[d] += w
        for d, (x, cap) in enumerate(zip(load, bt.capacity), 1):
            if x > cap:
                problems.append(f"bin {n} (type {b.bin_type}): dimension {d} load {x} > {cap}")
    for it in instance.items:
        got = counts[it.index]
        if it.index in J and got != it.demand:
            problems.append(f"demand of item {it.index}: {got} != {it.demand}")
        elif got < it.demand:
            problems.append(f"demand of item {it.index}: {got} < {it.demand}")
    if cost != solution.total_cost:
        problems.append(f"total cost {solution.total_cost} but bins cost {cost}")
    if solution.fingerprint and solution.fingerprint != instance.fingerprint():
        problems.append("solution was computed for a different instance")
    return ValidationReport(not problems, problems)


# ---------------------------------------------------------------------------
# rendering


def render_text(solution: PackingSolution) -> str:
    lines = [
        f"{b.bin_type}: " + " ".join(f"({i},{j})" for i, j in b.contents) for b in solution.bins
    ]
    return "".join(ln.rstrip() + "\n" for ln in lines)


def parse_text(text: str, instance: Instance) -> PackingSolution:
    bins = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        try:
            if not sep:
                raise ValueError
            t = int(head)
            contents = []
            for tok in rest.split():
                i, j = tok.strip("()").split(",")
                contents.append((int(i), int(j)))
        except ValueError:
            raise ValueError(f"solution line {lineno}: cannot parse {raw!r}") from None
        bins.append(Bin(t, tuple(sorted(contents))))
    total = sum(
        (instance.bin(b.bin_type).cost for b in bins if 1 <= b.bin_type <= instance.q),
        Fraction(0),
    )
    return PackingSolution(bins, total)


def _cost_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_json(solution: PackingSolution) -> str:
    doc = {
        "fingerprint": solution.fingerprint,
        "total_cost": _cost_str(solution.total_cost),
        "bins": [
            {"type": b.bin_type, "contents": [list(label) for label in b.contents]}
            for b in solution.bins
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def from_json(text: str) -> PackingSolution:
    doc = json.loads(text)
    bins = [
        Bin(int(b["type"]), tuple(sorted((int(i), int(j)) for i, j in b["contents"])))
        for b in doc["bins"]
    ]
    return PackingSolution(bins, Fraction(doc["total_cost"]), doc.get("fingerprint", ""))
