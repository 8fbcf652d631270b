"""
Features of one edge in a toy edge stream
=========================================

Parse a handful of timestamped interactions, cut them into snapshots and
look at what the detector sees for a single candidate edge.
"""

import numpy as np

from stcad.features import FEATURE_NAMES, FeatureExtractor
from stcad.graph import parse_edge_stream, partition_snapshots
from stcad.sampler import build_sample

# a small chat log: "sender receiver timestamp"
stream = """
alice bob 1
bob carol 2
carol alice 3
alice dave 4
bob carol 5
dave erin 6
alice bob 7
carol erin 8
bob dave 9
alice carol 10
erin bob 11
alice bob 12
"""
graph = parse_edge_stream(stream)
print(graph.num_nodes, "people,", graph.num_edges, "messages")

# three messages per snapshot gives four snapshots
snaps = partition_snapshots(graph, 3)
for s in snaps:
    print(s.index, [(graph.labels[u], graph.labels[v]) for u, v in s.edges])

# the last alice-bob message, with a window of the last T=2 snapshots and C=3 context nodes
i, j = graph.node_id("alice"), graph.node_id("bob")
sample = build_sample(snaps, 3, (i, j), 0, C=3, T=2, rng=np.random.default_rng(0))
for seq in sample.window:
    print("window row:", [graph.labels[v] for v in seq])

# one feature row per node position
feats, pos, rel = FeatureExtractor(snaps).encode(sample)
print("      node  pos rel", "  ".join(f"{n:>6s}" for n in FEATURE_NAMES))
for v, row, p, r in zip([v for seq in sample.window for v in seq], feats, pos, rel):
    print(f"{graph.labels[v]:>10s} {int(p):4d} {int(r):3d}", "  ".join(f"{x:6.3f}" for x in row))
