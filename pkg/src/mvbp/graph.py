"""Arc-flow pattern graphs.

For every bin type ``t`` a DAG is built whose paths from ``S_t`` to ``T_t``
are exactly the packing patterns of that bin type: multisets of item
incarnations that fit the capacity vector and use item ``i`` at most ``b_i``
times. The per-type graphs are joined under a super source ``S`` and a super
target ``T``; the bin type of a pattern is the connector ``T_t -> T`` it
leaves through, which is also the arc charged with the bin cost.

Construction works in two stages:

* ``build_type_graph`` enumerates the states ``(load, last position, copies)``
  of a dynamic program over incarnations in a fixed decreasing order, then
  merges states whose *residual labels* (componentwise minimum of
  ``capacity - weight`` over all completions) coincide.
* ``compress_final`` merges nodes of the joined graph, across bin types,
  whose longest-path labels from ``S`` coincide, then drops parallel arcs of
  the same item.

Both merges are sound for capacities because labels are monotone along arcs.
Merging on weights alone can let a path repeat an item beyond its demand, so
either merge is checked afterwards and repeated with a per-item copy counter
appended to the labels of every offending item until no path breaks a demand
cap. Zero-weight items always carry a counter (otherwise they would become
self-loops).

Passing ``exact_caps=False`` skips the counters, which gives much smaller
graphs for instances with many small low-demand items, at the price of
paths that repeat an item beyond its demand. The flow model stays exact
either way (demand rows and arc bounds), and the extractor drops surplus
copies.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, NamedTuple

import numpy as np

from .instance import LOSS, Instance, fits

Label = tuple[int, int]
Vec = tuple[int, ...]

DEFAULT_PATH_CAP = 10**6


class GraphError(RuntimeError):
    pass


class PatternLimitError(GraphError):
    """Pattern or path enumeration refused because it exceeds the cap."""


class Arc(NamedTuple):
    tail: int
    head: int
    item: int
    variant: int

    @property
    def label(self) -> Label:
        return (self.item, self.variant)

    @property
    def is_loss(self) -> bool:
        return self.item == 0


@dataclass
class ArcFlowGraph:
    """Directed acyclic multigraph on nodes ``0 .. num_nodes-1``.

    ``type_sources``/``type_targets`` map bin types to ``S_t``/``T_t``;
    ``node_types`` records which per-type components a node came from.
    """

    dims: int
    num_nodes: int
    arcs: list[Arc]
    source: int
    target: int
    weights: dict[Label, Vec]
    demands: dict[int, int]
    type_sources: dict[int, int]
    type_targets: dict[int, int]
    node_types: dict[int, frozenset[int]] = field(default_factory=dict)
    node_labels: dict[int, Vec] | None = None

    @property
    def nodes(self) -> range:
        return range(self.num_nodes)

    @property
    def stitched(self) -> bool:
        return self.target not in self.type_targets.values()

    def weight(self, arc: Arc) -> Vec:
        return self.weights[arc.label]

    def out_arcs(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for k, a in enumerate(self.arcs):
            out[a.tail].append(k)
        return out

    def in_arcs(self) -> list[list[int]]:
        inn: list[list[int]] = [[] for _ in self.nodes]
        for k, a in enumerate(self.arcs):
            inn[a.head].append(k)
        return inn

    def topological_order(self) -> list[int]:
        indeg = [0] * self.num_nodes
        for a in self.arcs:
            indeg[a.head] += 1
        out = self.out_arcs()
        heap = [v for v in self.nodes if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for k in out[v]:
                h = self.arcs[k].head
                indeg[h] -= 1
                if indeg[h] == 0:
                    heapq.heappush(heap, h)
        if len(order) != self.num_nodes:
            raise GraphError("graph contains a cycle")
        return order

    def arc_type(self, arc: Arc) -> int | None:
        """Bin type charged by ``arc`` if it is a ``T_t -> T`` connector."""
        if arc.head != self.target or not self.stitched:
            return None
        for t, tt in self.type_targets.items():
            if tt == arc.tail:
                return t
        return None


@dataclass(frozen=True)
class GraphStats:
    num_vertices: int
    num_arcs: int
    pct_vertices_removed: float
    pct_arcs_removed: float
    vertices_before: int
    arcs_before: int


# ---------------------------------------------------------------------------
# per-type construction


def incarnation_order(instance: Instance) -> list:
    """Items by decreasing (lexicographic) weight, incarnations likewise."""
    items = sorted(
        instance.items,
        key=lambda it: (tuple(-x for x in max(inc.weight for inc in it.incarnations)), it.index),
    )
    order = []
    for it in items:
        order.extend(
            sorted(it.incarnations, key=lambda inc: (tuple(-x for x in inc.weight), inc.variant))
        )
    return order


def _max_copies(incs, capacity: Vec) -> float:
    """Upper bound on copies of one item that fit together in ``capacity``."""
    bound = float("inf")
    for d, cap in enumerate(capacity):
        lightest = min(inc.weight[d] for inc in incs)
        if lightest > 0:
            bound = min(bound, cap // lightest)
    return bound


def _raw_type_graph(instance: Instance, t: int) -> ArcFlowGraph:
    capacity = instance.bin(t).capacity
    order = [inc for inc in incarnation_order(instance) if fits(inc.weight, capacity)]
    demand = {it.index: it.demand for it in instance.items}
    by_item = defaultdict(list)
    for inc in order:
        by_item[inc.item].append(inc)
    tracked = {i: demand[i] < _max_copies(incs, capacity) for i, incs in by_item.items()}
    item_at = [inc.item for inc in order]
    weight_at = [inc.weight for inc in order]
    one_dim = instance.dims == 1

    zero = (0,) * instance.dims
    start = (zero, -1, 0)
    index = {start: 0}
    states = [start]
    arcs: list[tuple[int, int, int]] = []
    head = 0
    while head < len(states):
        load, k, c = states[head]
        u = head
        head += 1
        prev_item = item_at[k] if k >= 0 else None
        room = tuple(cap - x for cap, x in zip(capacity, load))
        for pos in range(max(k, 0), len(order)):
            w = weight_at[pos]
            if one_dim:
                if w[0] > room[0]:
                    continue
            elif not fits(w, room):
                continue
            i = item_at[pos]
            if i == prev_item:
                if tracked[i]:
                    if c >= demand[i]:
                        continue
                    nc = c + 1
                else:
                    nc = 0
            else:
                nc = 1 if tracked[i] else 0
            nxt = (tuple(a + b for a, b in zip(load, w)), pos, nc)
            v = index.get(nxt)
            if v is None:
                v = index[nxt] = len(states)
                states.append(nxt)
            arcs.append((u, v, pos))
    target = len(states)
    arc_list = [Arc(u, v, order[pos].item, order[pos].variant) for u, v, pos in arcs]
    arc_list.extend(Arc(u, target, 0, 0) for u in range(target))
    return ArcFlowGraph(
        dims=instance.dims,
        num_nodes=target + 1,
        arcs=arc_list,
        source=0,
        target=target,
        weights=instance.weights(),
        demands=demand,
        type_sources={t: 0},
        type_targets={t: target},
        node_types={v: frozenset({t}) for v in range(target + 1)},
    )


def build_type_graph(
    instance: Instance, t: int, compress: bool = True, exact_caps: bool = True
) -> tuple[ArcFlowGraph, int, int]:
    """Pattern graph of bin type ``t``; returns ``(graph, S_t, T_t)``.

    With ``compress=False`` the raw dynamic-programming graph is returned.
    With ``exact_caps=False`` compression merges on weight labels alone and
    paths may repeat an item more than its demand.
    """
    if not 1 <= t <= instance.q:
        raise GraphError(f"bin type {t} out of range 1..{instance.q}")
    g = _raw_type_graph(instance, t)
    # an item-free graph is already the single loss arc S_t -> T_t
    if compress and any(not a.is_loss for a in g.arcs):
        g = _residual_compress(g, instance.bin(t).capacity, exact_caps)
    g.node_labels = psi_labels(g)
    return g, g.source, g.type_targets[t]


# ---------------------------------------------------------------------------
# labels


def psi_labels(graph: ArcFlowGraph) -> dict[int, Vec]:
    """Longest-path weight from the source, per dimension."""
    p = graph.dims
    inn = graph.in_arcs()
    labels: dict[int, Vec] = {}
    for v in graph.topological_order():
        best = (0,) * p
        if v != graph.source and inn[v]:
            best = None
            for k in inn[v]:
                a = graph.arcs[k]
                cand = tuple(x + y for x, y in zip(labels[a.tail], graph.weights[a.label]))
                best = cand if best is None else tuple(map(max, best, cand))
        labels[v] = best
    return labels


def _residual_labels(graph: ArcFlowGraph, capacity: Vec) -> dict[int, Vec]:
    """Componentwise minimum of ``capacity - weight`` over completions to the target."""
    out = graph.out_arcs()
    labels: dict[int, Vec] = {}
    for v in reversed(graph.topological_order()):
        best = capacity
        if v != graph.target and out[v]:
            best = None
            for k in out[v]:
                a = graph.arcs[k]
                cand = tuple(x - y for x, y in zip(labels[a.head], graph.weights[a.label]))
                best = cand if best is None else tuple(map(min, best, cand))
        labels[v] = best
    return labels


def _item_counts(
    graph: ArcFlowGraph, items: list[int], forward: bool, end: int | None = None
) -> np.ndarray:
    """Max copies of each of ``items`` on paths source->v (or v->``end``).

    Returns an array of shape ``(num_nodes, len(items))``; unreachable
    entries are large negative numbers.
    """
    end = graph.target if end is None else end
    col = {i: c for c, i in enumerate(items)}
    counts = np.full((graph.num_nodes, len(items)), -(10**9), dtype=np.int64)
    order = graph.topological_order()
    if forward:
        adj, origin, far = graph.in_arcs(), graph.source, "tail"
    else:
        order = order[::-1]
        adj, origin, far = graph.out_arcs(), end, "head"
    for v in order:
        if v == origin:
            counts[v] = 0
            continue
        row = counts[v]
        for k in adj[v]:
            a = graph.arcs[k]
            other = counts[getattr(a, far)]
            c = col.get(a.item)
            if c is None:
                np.maximum(row, other, out=row)
            else:
                bumped = other.copy()
                bumped[c] += 1
                np.maximum(row, bumped, out=row)
    return counts


def max_item_counts(graph: ArcFlowGraph, end: int | None = None) -> dict[int, int]:
    """Largest number of arcs of each item on any path from the source to ``end``."""
    end = graph.target if end is None else end
    items = sorted(graph.demands)
    counts = _item_counts(graph, items, forward=True)
    return {i: int(counts[end][c]) for c, i in enumerate(items)}


def _cap_violations(graph: ArcFlowGraph) -> set[int]:
    counts = max_item_counts(graph)
    return {i for i, c in counts.items() if c > graph.demands[i]}


def _zero_weight_items(graph: ArcFlowGraph) -> set[int]:
    return {
        label[0]
        for label, w in graph.weights.items()
        if label != LOSS and not any(w)
    }


def _copy_keys(graph: ArcFlowGraph, counted: list[int], forward: bool) -> list[tuple]:
    """Per-node merge keys that keep demand caps of ``counted`` items exact.

    With ``before``/``after`` the max copies of item ``i`` on paths into and
    out of a node, the forward key is ``before`` unless the item can no
    longer follow (then ``b_i + 1``, a downstream-closed region). The
    backward key is ``b_i - after`` unless the item has not occurred yet
    (then ``-1``, an upstream-closed region). Both are monotone along arcs,
    so lexicographic order on (weight label, key) stays topological, and a
    path crossing merged nodes never collects more than ``b_i`` copies.
    """
    if not counted:
        return [()] * graph.num_nodes
    before = _item_counts(graph, counted, forward=True)
    after = _item_counts(graph, counted, forward=False)
    caps = np.array([graph.demands[i] for i in counted], dtype=np.int64)
    if forward:
        keys = np.where((after == 0) & (before > 0), caps + 1, before)
    else:
        keys = np.where((before == 0) & (after > 0), -1, caps - after)
    return [tuple(int(x) for x in row) for row in keys]


# ---------------------------------------------------------------------------
# merging


def _merge(
    graph: ArcFlowGraph,
    key: Callable[[int], Hashable],
    rank: Callable[[Hashable], tuple],
    dedup: bool,
) -> ArcFlowGraph:
    """Contract nodes with equal keys and drop loss self-loops.

    With ``dedup`` only one arc per ``(tail, head, item)`` survives (smallest
    variant); otherwise only exact duplicates are dropped. ``rank`` orders
    the merged nodes and must be a topological order.
    """
    keys = [key(v) for v in graph.nodes]
    distinct = sorted(set(keys), key=rank)
    new_id = {k: n for n, k in enumerate(distinct)}
    node_map = [new_id[k] for k in keys]
    kept: dict[tuple, int] = {}
    for a in graph.arcs:
        u, v = node_map[a.tail], node_map[a.head]
        if u == v:
            if a.item:
                raise GraphError(f"merge created a self-loop on item {a.item}")
            continue
        slot = (u, v, a.item) if dedup else (u, v, a.item, a.variant)
        if slot not in kept or a.variant < kept[slot]:
            kept[slot] = a.variant
    arcs = sorted(Arc(*slot[:3], j) for slot, j in kept.items())
    node_types: dict[int, frozenset[int]] = defaultdict(frozenset)
    for v in graph.nodes:
        node_types[node_map[v]] |= graph.node_types.get(v, frozenset())
    return ArcFlowGraph(
        dims=graph.dims,
        num_nodes=len(distinct),
        arcs=arcs,
        source=node_map[graph.source],
        target=node_map[graph.target],
        weights=graph.weights,
        demands=graph.demands,
        type_sources={t: node_map[v] for t, v in graph.type_sources.items()},
        type_targets={t: node_map[v] for t, v in graph.type_targets.items()},
        node_types=dict(node_types),
    )


def _merge_until_capped(
    graph: ArcFlowGraph,
    key_for: Callable[[list[int]], Callable[[int], Hashable]],
    rank,
    dedup: bool,
    exact_caps: bool,
) -> ArcFlowGraph:
    """Merge on ``key_for(counted)``, growing ``counted`` until caps hold.

    Without ``exact_caps`` only zero-weight items are counted.
    """
    counted = _zero_weight_items(graph)
    while True:
        merged = _merge(graph, key_for(sorted(counted)), rank, dedup)
        if not exact_caps:
            return merged
        bad = _cap_violations(merged)
        if not bad:
            return merged
        if bad <= counted:
            raise GraphError(f"demand caps violated for counted items {sorted(bad)}")
        counted |= bad


def _residual_compress(graph: ArcFlowGraph, capacity: Vec, exact_caps: bool) -> ArcFlowGraph:
    weights = _residual_labels(graph, capacity)

    def key_for(counted):
        copies = _copy_keys(graph, counted, forward=False)
        return lambda v: weights[v] + copies[v]

    return _merge_until_capped(graph, key_for, lambda k: k, dedup=False, exact_caps=exact_caps)


# ---------------------------------------------------------------------------
# joining and final compression


def stitch(graphs: list[tuple[ArcFlowGraph, int, int]]) -> ArcFlowGraph:
    """Join per-type graphs under a super source and a super target."""
    if not graphs:
        raise GraphError("no bin types")
    first = graphs[0][0]
    all_types = frozenset(t for g, _, _ in graphs for t in g.type_targets)
    arcs: list[Arc] = []
    node_types: dict[int, frozenset[int]] = {0: all_types}
    type_sources, type_targets = {}, {}
    offset = 1
    for g, s_t, t_t in graphs:
        (t,) = [t for t, v in g.type_targets.items() if v == t_t]
        for v in g.nodes:
            node_types[v + offset] = g.node_types.get(v, frozenset({t}))
        arcs.extend(Arc(a.tail + offset, a.head + offset, a.item, a.variant) for a in g.arcs)
        type_sources[t] = s_t + offset
        type_targets[t] = t_t + offset
        offset += g.num_nodes
    target = offset
    node_types[target] = all_types
    for t in sorted(type_sources):
        arcs.append(Arc(0, type_sources[t], 0, 0))
        arcs.append(Arc(type_targets[t], target, 0, 0))
    weights = {}
    demands = {}
    for g, _, _ in graphs:
        weights.update(g.weights)
        demands.update(g.demands)
    return ArcFlowGraph(
        dims=first.dims,
        num_nodes=target + 1,
        arcs=sorted(arcs),
        source=0,
        target=target,
        weights=weights,
        demands=demands,
        type_sources=type_sources,
        type_targets=type_targets,
        node_types=node_types,
    )


def build_graph(instance: Instance, exact_caps: bool = True) -> ArcFlowGraph:
    """Stitched graph of all bin types, before the final compression step."""
    return stitch(
        [build_type_graph(instance, t, exact_caps=exact_caps) for t in range(1, instance.q + 1)]
    )


def compress_final(
    graph: ArcFlowGraph, exact_caps: bool = True
) -> tuple[ArcFlowGraph, GraphStats]:
    """Merge nodes with equal longest-path labels from ``S`` and drop parallel arcs.

    ``S``, ``T`` and every ``T_t`` keep their identity; all other nodes may
    merge across bin types.
    """
    fixed = {graph.source: ("S",), graph.target: ("T",)}
    for t, v in graph.type_targets.items():
        fixed[v] = ("Tt", t)

    weights = psi_labels(graph)

    def key_for(counted):
        copies = _copy_keys(graph, counted, forward=True)
        return lambda v: fixed.get(v) or ("v", weights[v] + copies[v])

    def rank(k):
        order = {"S": 0, "v": 1, "Tt": 2, "T": 3}[k[0]]
        return (order, k[1] if len(k) > 1 else ())

    out = _merge_until_capped(graph, key_for, rank, dedup=True, exact_caps=exact_caps)
    out.node_labels = psi_labels(out)
    return out, graph_stats(graph, out)


def graph_stats(before: ArcFlowGraph, after: ArcFlowGraph) -> GraphStats:
    nv0, na0 = before.num_nodes, len(before.arcs)
    nv, na = after.num_nodes, len(after.arcs)
    return GraphStats(
        num_vertices=nv,
        num_arcs=na,
        pct_vertices_removed=100.0 * (nv0 - nv) / nv0 if nv0 else 0.0,
        pct_arcs_removed=100.0 * (na0 - na) / na0 if na0 else 0.0,
        vertices_before=nv0,
        arcs_before=na0,
    )


# ---------------------------------------------------------------------------
# pattern enumeration


def count_paths(graph: ArcFlowGraph, start: int, end: int) -> int:
    out = graph.out_arcs()
    ways = [0] * graph.num_nodes
    ways[end] = 1
    for v in reversed(graph.topological_order()):
        if v != end:
            ways[v] = sum(ways[graph.arcs[k].head] for k in out[v])
    return ways[start]


def _add(pattern: tuple, element) -> tuple:
    return tuple(sorted(pattern + (element,)))


def pattern_paths(
    graph: ArcFlowGraph, t: int, cap: int = 10**5, incarnations: bool = False
) -> dict[tuple, list[int]]:
    """Distinct patterns of bin type ``t`` with one witness path (arc indices) each.

    Patterns are sorted tuples of item indices, or of ``(item, variant)``
    labels when ``incarnations`` is set. Raises :class:`PatternLimitError`
    once more than ``cap`` patterns are reachable from some node.
    """
    end = graph.type_targets[t]
    out = graph.out_arcs()
    table: dict[int, dict[tuple, list[int]]] = {end: {(): []}}
    for v in reversed(graph.topological_order()):
        if v == end:
            continue
        here: dict[tuple, list[int]] = {}
        for k in out[v]:
            a = graph.arcs[k]
            below = table.get(a.head)
            if not below:
                continue
            for pat, path in below.items():
                if a.item:
                    pat = _add(pat, a.label if incarnations else a.item)
                if pat not in here:
                    here[pat] = [k, *path]
            if len(here) > cap:
                raise PatternLimitError(
                    f"more than {cap} patterns for bin type {t}; use an external backend"
                )
        if here:
            table[v] = here
    return table.get(graph.source, {})


def enumerate_patterns(
    graph: ArcFlowGraph, t: int, cap: int = DEFAULT_PATH_CAP, incarnations: bool = False
) -> set[tuple]:
    """Item-index multisets (sorted tuples) over all source-to-``T_t`` paths."""
    end = graph.type_targets[t]
    paths = count_paths(graph, graph.source, end)
    if paths > cap:
        raise PatternLimitError(f"{paths} paths to T_{t} exceed the cap of {cap}")
    return set(pattern_paths(graph, t, cap=cap, incarnations=incarnations))


# ---------------------------------------------------------------------------
# export


def _fmt_vec(v: Vec) -> str:
    return "(" + ",".join(map(str, v)) + ")"


def node_name(graph: ArcFlowGraph, v: int) -> str:
    if v == graph.source and graph.stitched:
        return "S"
    if v == graph.target and graph.stitched:
        return "T"
    for t, s in graph.type_sources.items():
        if s == v and len([1 for x in graph.type_sources.values() if x == v]) == 1:
            return f"S{t}"
    for t, s in graph.type_targets.items():
        if s == v:
            return f"T{t}"
    return f"v{v}"


def export_dot(graph: ArcFlowGraph) -> str:
    """Graphviz rendering; nodes from a single bin type are clustered."""
    labels = graph.node_labels
    lines = ["digraph arcflow {", "  rankdir=LR;", "  node [shape=circle, fontsize=10];"]

    def node_line(v: int) -> str:
        text = node_name(graph, v)
        if labels is not None and v in labels:
            text += "\\n" + _fmt_vec(labels[v])
        return f'    n{v} [label="{text}"];'

    types = sorted(graph.type_targets)
    clustered = set()
    if len(types) > 1 or graph.stitched:
        for t in types:
            members = [
                v
                for v in graph.nodes
                if graph.node_types.get(v) == frozenset({t})
                and v not in (graph.source, graph.target)
            ]
            if not members:
                continue
            lines.append(f"  subgraph cluster_{t} {{")
            lines.append(f'    label="bin type {t}";')
            lines.extend(node_line(v) for v in members)
            lines.append("  }")
            clustered.update(members)
    lines.extend(node_line(v)[2:] for v in graph.nodes if v not in clustered)
    for a in graph.arcs:
        if a.is_loss:
            lines.append(f"  n{a.tail} -> n{a.head} [style=dashed];")
        else:
            lines.append(f'  n{a.tail} -> n{a.head} [label="{a.item},{a.variant}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: ArcFlowGraph) -> str:
    labels = graph.node_labels if graph.node_labels is not None else psi_labels(graph)
    doc = {
        "dims": graph.dims,
        "source": graph.source,
        "target": graph.target,
        "type_sources": {str(t): v for t, v in sorted(graph.type_sources.items())},
        "type_targets": {str(t): v for t, v in sorted(graph.type_targets.items())},
        "nodes": [{"id": v, "label": list(labels[v])} for v in graph.nodes],
        "arcs": [list(a) for a in graph.arcs],
    }
    return json.dumps(doc, indent=1, sort_keys=True)
