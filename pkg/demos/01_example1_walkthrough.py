"""Walk through the whole method on the two-dimensional toy instance.

Two bin types, (100,75) at cost 3 and (75,50) at cost 2. Item 1 is needed
twice and has one shape; item 2 is needed once and has two alternative
shapes.
"""

from mvbp.graph import build_graph, build_type_graph, compress_final, enumerate_patterns
from mvbp.instance import parse_instance
from mvbp.model import assemble, emit_interchange
from mvbp.solution import extract, render_text, validate
from mvbp.solver import BackendConfig, solve, solve_oracle

TEXT = """\
2
2
3 100 75
2 75 50
2
2 1
  75 50
1 2
  40 15
  25 25
"""

inst = parse_instance(TEXT, name="toy")
print(f"n={inst.n} m={inst.m} q={inst.q}")

# %% every path of a per-type graph is a pattern, and every pattern is a path
for t in (1, 2):
    g, s, tt = build_type_graph(inst, t)
    pats = sorted(enumerate_patterns(g, t, incarnations=True))
    print(f"type {t}: {g.num_nodes} nodes, {len(g.arcs)} arcs, patterns {pats}")

# %% join the types and merge nodes with equal longest-path labels
stitched = build_graph(inst)
graph, stats = compress_final(stitched)
print(f"final step: {stats.vertices_before}->{stats.num_vertices} nodes, "
      f"{stats.arcs_before}->{stats.num_arcs} arcs")
for v in graph.topological_order():
    print(f"  node {v}: psi={graph.node_labels[v]}")

# %% the integer program
model = assemble(graph, inst)
print(emit_interchange(model))

# %% solve, then read bins off the flow
report = solve(model, BackendConfig(kind="builtin"))
print(f"optimum {report.objective} using {report.z} bins, {report.bb_nodes} B&B nodes")
sol = extract(graph, report, inst)
print(render_text(sol), end="")
print("valid:", bool(validate(sol, inst)))

# %% an exhaustive search that never looks at the graph agrees
print("oracle:", solve_oracle(inst).cost)
