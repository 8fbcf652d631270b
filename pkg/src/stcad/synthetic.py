"""Planted-anomaly benchmark: a community-structured dynamic graph.

Normal traffic stays mostly inside communities: recurring "backbone" pairs,
triadic closures over the backbone, fresh intra-community pairs and a small
share of cross-community edges. Anomalies for evaluation are cross-community
pairs that never occur.
"""

import numpy as np

from ._seeding import derive_rng
from .graph import DynamicGraph


def planted_anomaly_graph(n_nodes=200, n_snapshots=8, snapshot_size=300, n_communities=2,
                          backbone_degree=2, mix=(0.7, 0.25, 0.03, 0.02), seed=0):
    """Return ``(graph, communities)``.

    ``mix`` gives the shares of backbone repeats, triadic closures, new
    intra-community pairs and cross-community pairs in every snapshot.
    ``communities[v]`` is the community of dense node ``v``.
    """
    rng = derive_rng(seed, "synthetic")
    communities = np.arange(n_nodes) * n_communities // n_nodes
    members = [np.flatnonzero(communities == c) for c in range(n_communities)]

    backbone = set()
    for group in members:
        for u in group:
            for v in rng.choice(group[group != u], size=backbone_degree, replace=False):
                backbone.add((min(u, v), max(u, v)))
    backbone = sorted(backbone)
    adj = {v: [] for v in range(n_nodes)}
    for u, v in backbone:
        adj[u].append(v)
        adj[v].append(u)

    probs = np.asarray(mix, dtype=np.float64)
    probs = probs / probs.sum()
    edges = []
    recent = adj
    for snap in range(n_snapshots):
        kinds = rng.choice(4, size=snapshot_size, p=probs)
        current = {v: set() for v in range(n_nodes)}
        for k, kind in enumerate(kinds):
            if kind == 0:
                u, v = backbone[rng.integers(len(backbone))]
            elif kind == 1:
                # friend of a friend in the previous snapshot
                u = int(rng.integers(n_nodes))
                hood = recent[u] or adj[u]
                mid = hood[rng.integers(len(hood))]
                hood = recent[mid] or adj[mid]
                v = hood[rng.integers(len(hood))]
                if v == u:
                    v = mid
            elif kind == 2:
                group = members[communities[rng.integers(n_nodes)]]
                u, v = rng.choice(group, size=2, replace=False)
            else:
                a, b = rng.choice(n_communities, size=2, replace=False)
                u, v = rng.choice(members[a]), rng.choice(members[b])
            edges.append((int(u), int(v), float(snap * snapshot_size + k)))
            current[int(u)].add(int(v))
            current[int(v)].add(int(u))
        recent = {v: sorted(nb) for v, nb in current.items()}
    labels = tuple(str(v) for v in range(n_nodes))
    return DynamicGraph.from_edges(edges, labels=labels), communities


def cross_community(communities):
    """Predicate accepting pairs whose endpoints lie in different communities."""
    def accept(pair):
        return communities[pair[0]] != communities[pair[1]]
    return accept
