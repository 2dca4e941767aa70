"""How much does the final compression step remove on generated classes?

Small items (range 1..100) leave many nodes with equal longest-path labels,
so merging removes a large share; large items (50..100) give short paths
and little to merge.
"""

import numpy as np

from mvbp.graph import build_graph, compress_final
from mvbp.instance import generate_instance

print(" X  q    n   #v      #a     %v    %a")
for X, q in [(1, 5), (2, 5), (3, 3)]:
    for n in (25, 100, 200):
        stats = [
            compress_final(build_graph(generate_instance(X, q, n, s), False), False)[1]
            for s in range(3)
        ]
        print(f"{X:2d} {q:2d} {n:4d} {np.mean([s.num_vertices for s in stats]):5.0f} "
              f"{np.mean([s.num_arcs for s in stats]):7.0f} "
              f"{np.mean([s.pct_vertices_removed for s in stats]):6.1f} "
              f"{np.mean([s.pct_arcs_removed for s in stats]):5.1f}")

# with demand caps enforced on every path the graphs are larger and
# compress less; the optimum is the same
inst = generate_instance(1, 5, 50, 0)
for exact in (False, True):
    _, st = compress_final(build_graph(inst, exact), exact)
    print(f"exact_caps={exact}: #v={st.num_vertices} #a={st.num_arcs} %v={st.pct_vertices_removed:.1f}")
