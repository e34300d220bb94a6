"""Communication graphs: Laplacian spectra and connected random deployments.

Builds a few hand-made graphs, checks their algebraic connectivity, then draws
a connected random geometric deployment like the one the benchmark uses.
"""

import numpy as np

from ciwnls import build_graph, fiedler_value, generate_random_geometric, \
    graph_to_json, neighbors

# classic small graphs and their known Fiedler values
path = build_graph(3, [(0, 1), (1, 2)])
star = build_graph(4, [(0, 1), (0, 2), (0, 3)])
complete = build_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])

print("lambda_2(path-3)     =", fiedler_value(path), "(expected 1)")
print("lambda_2(star-4)     =", fiedler_value(star), "(expected 1)")
print("lambda_2(complete-4) =", fiedler_value(complete), "(expected 4)")
print("neighbors of the middle path agent:", neighbors(path, 1))

# a disconnected graph has a zero Fiedler value
split = build_graph(4, [(0, 1), (2, 3)])
print("lambda_2(two disjoint edges) =", fiedler_value(split))

# the benchmark deployment law: 10 agents on the unit square, radius 0.4,
# redrawn until connected
rng = np.random.default_rng(2016)
rgg = generate_random_geometric(10, 0.4, rng)
print(f"\nrandom geometric deployment: {len(rgg.edges)} edges, "
      f"lambda_2 = {rgg.fiedler:.4f}, connected = {rgg.is_connected}")
print("degree sequence:", sorted(rgg.degrees.tolist()))

# serialized form (1-based agent indices on the wire)
import json

obj = json.loads(graph_to_json(rgg))
print("\nJSON form: keys", sorted(obj), "- first edges", obj["edges"][:4])
