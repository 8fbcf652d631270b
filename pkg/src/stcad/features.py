"""Level-1 and coupling features for nodes of an edge's context window.

Level-1 (per node):  PageRank in the snapshot, hop distance to the nearer
endpoint of the central edge, and lifetime of the central edge.
Coupling (per edge, broadcast to every node of the sample): change of the
endpoint distance, of the endpoint degree sum and of the common-neighbour
count between snapshot ``t - delta_t`` and ``t``.
"""

import csv
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .graph import first_occurrence_index

DIST_CAP = 5
FEATURE_NAMES = ("f_glo", "f_loc", "f_tmp", "f_dc", "f_ic", "f_nc")


class FeatureVector(NamedTuple):
    f_glo: float
    f_loc: float
    f_tmp: float
    f_dc: float
    f_ic: float
    f_nc: float


def pagerank(s, damping=0.85, tol=1e-8, max_iter=1000):
    """PageRank of every node of snapshot ``s`` by power iteration.

    Edges are undirected; nodes without neighbours spread their mass
    uniformly. Iteration stops once the geometric bound on the remaining
    L1 error, ``|x_k+1 - x_k|_1 * d / (1 - d)``, drops below ``tol``.
    """
    nodes = sorted(s.node_set)
    n = len(nodes)
    if n == 0:
        raise ValueError("pagerank of an empty snapshot")
    pos = {v: k for k, v in enumerate(nodes)}
    rows, cols = [], []
    for v in nodes:
        for u in s.neighbors(v):
            rows.append(pos[v])
            cols.append(pos[u])
    deg = np.array([s.degree(v) for v in nodes], dtype=np.float64)
    dangling = deg == 0
    inv_deg = np.divide(1.0, deg, out=np.zeros(n), where=~dangling)
    # A[v, u] = 1 for u ~ v; x_new[v] = sum_u A[v, u] x[u] / deg(u)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    x = np.full(n, 1.0 / n)
    bound = damping / (1.0 - damping) if damping < 1 else 1.0
    for _ in range(max_iter):
        spread = A @ (x * inv_deg) + x[dangling].sum() / n
        x_new = damping * spread + (1.0 - damping) / n
        x_new /= x_new.sum()
        delta = np.abs(x_new - x).sum()
        x = x_new
        if delta * bound < tol:
            break
    return dict(zip(nodes, x.tolist()))


def shortest_distance(s, a, b, dist_cap=DIST_CAP):
    """Hop distance between ``a`` and ``b`` in ``s``, truncated at ``dist_cap``.

    Unreachable pairs and pairs with an endpoint missing from the snapshot
    get ``dist_cap``. The search never expands past depth ``dist_cap - 1``.
    """
    if a == b:
        return 0
    if a not in s.adjacency or b not in s.adjacency:
        return dist_cap
    seen = {a}
    frontier = [a]
    for depth in range(1, dist_cap):
        nxt = []
        for u in frontier:
            for w in s.adjacency[u]:
                if w == b:
                    return depth
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return dist_cap


def endpoint_distance(s, v, central, dist_cap=DIST_CAP):
    """``min(dist(v, i), dist(v, j))`` with one search from ``v``."""
    i, j = central
    if v == i or v == j:
        return 0
    if v not in s.adjacency:
        return dist_cap
    targets = {i, j}
    seen = {v}
    frontier = [v]
    for depth in range(1, dist_cap):
        nxt = []
        for u in frontier:
            for w in s.adjacency[u]:
                if w in targets:
                    return depth
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return dist_cap


def level1_features(snapshots, central, v, t, pageranks, first_index=None, dist_cap=DIST_CAP):
    """``(f_glo, f_loc, f_tmp)`` for node ``v`` of a sample at snapshot index ``t``.

    ``pageranks[t]`` is the cached PageRank map of ``snapshots[t]``; nodes
    absent from the snapshot score 0. ``first_index`` maps canonical pairs to
    their first snapshot (built on demand when omitted). The lifetime is
    ``t - t_start`` and 0 when the pair has not occurred yet or never does.
    """
    i, j = central
    s = snapshots[t]
    f_glo = pageranks[t].get(v, 0.0)
    f_loc = min(shortest_distance(s, v, i, dist_cap), shortest_distance(s, v, j, dist_cap))
    if first_index is None:
        first_index = first_occurrence_index(snapshots)
    t_start = first_index.get((min(i, j), max(i, j)))
    f_tmp = t - t_start if t_start is not None and t_start <= t else 0
    return f_glo, f_loc, f_tmp


def coupling_features(snapshots, central, t, delta_t=1, dist_cap=DIST_CAP):
    """``(f_dc, f_ic, f_nc)`` of the central edge at snapshot index ``t``.

    All three compare ``snapshots[t]`` with ``snapshots[t - delta_t]`` and are
    zero when that earlier snapshot does not exist.
    """
    if delta_t < 1:
        raise ValueError("delta_t must be >= 1")
    if t - delta_t < 0:
        return 0, 0, 0
    i, j = central
    cur, prev = snapshots[t], snapshots[t - delta_t]
    f_dc = max(shortest_distance(prev, i, j, dist_cap) - 1, 0)
    f_ic = abs((cur.degree(i) + cur.degree(j)) - (prev.degree(i) + prev.degree(j)))
    f_nc = abs(len(cur.neighbors(i) & cur.neighbors(j)) - len(prev.neighbors(i) & prev.neighbors(j)))
    return f_dc, f_ic, f_nc


def relative_class(s, central, v):
    """Structural position of ``v``: 0 on the edge, 1 common neighbour, 2 otherwise."""
    i, j = central
    if v == i or v == j:
        return 0
    if v in s.neighbors(i) and v in s.neighbors(j):
        return 1
    return 2


class FeatureExtractor:
    """Feature computation over a fixed snapshot list with shared caches.

    PageRank is computed for every snapshot up front so the object can be
    read concurrently afterwards.
    """

    def __init__(self, snapshots, dist_cap=DIST_CAP, delta_t=1, damping=0.85):
        self.snapshots = snapshots
        self.dist_cap = dist_cap
        self.delta_t = delta_t
        self.pageranks = [pagerank(s, damping) for s in snapshots]
        self.first_index = first_occurrence_index(snapshots)

    def node_features(self, central, v, t):
        lvl1 = level1_features(self.snapshots, central, v, t, self.pageranks,
                               self.first_index, self.dist_cap)
        return FeatureVector(*lvl1, *coupling_features(self.snapshots, central, t,
                                                       self.delta_t, self.dist_cap))

    def encode(self, sample):
        """Feature rows, window positions and relative classes of one sample.

        Returns arrays of shape ``(K, 6)``, ``(K,)`` and ``(K,)`` with
        ``K = (C + 2) * T`` in window-major order, oldest snapshot first.
        """
        T = len(sample.window)
        K = T * len(sample.window[0])
        feats = np.empty((K, 6))
        pos = np.empty(K)
        rel = np.empty(K)
        central = sample.central
        i, j = central
        k = 0
        for p, seq in enumerate(sample.window):
            t = sample.window_end - T + 1 + p
            s = self.snapshots[t]
            coupling = coupling_features(self.snapshots, central, t, self.delta_t, self.dist_cap)
            pr = self.pageranks[t]
            t_start = self.first_index.get((min(i, j), max(i, j)))
            f_tmp = t - t_start if t_start is not None and t_start <= t else 0
            for v in seq:
                f_loc = endpoint_distance(s, v, central, self.dist_cap)
                feats[k] = (pr.get(v, 0.0), f_loc, f_tmp, *coupling)
                pos[k] = p
                rel[k] = relative_class(s, central, v)
                k += 1
        return feats, pos, rel

    def encode_all(self, samples):
        """Stack :meth:`encode` over ``samples`` into an :class:`EncodedSet`."""
        parts = [self.encode(smp) for smp in samples]
        return EncodedSet(
            np.stack([p[0] for p in parts]),
            np.stack([p[1] for p in parts]),
            np.stack([p[2] for p in parts]),
            np.array([smp.label for smp in samples], dtype=np.float64),
        )


class EncodedSet(NamedTuple):
    """Model-ready arrays for a list of samples."""

    features: np.ndarray   # (N, K, 6)
    positions: np.ndarray  # (N, K)
    rel: np.ndarray        # (N, K)
    labels: np.ndarray     # (N,)

    def __len__(self):
        return len(self.labels)

    def take(self, idx):
        return EncodedSet(self.features[idx], self.positions[idx], self.rel[idx], self.labels[idx])


def write_feature_csv(path, samples, encoded):
    """Debug dump: one row per (sample, node position)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "t", "node", *FEATURE_NAMES])
        for sid, smp in enumerate(samples):
            nodes = [v for seq in smp.window for v in seq]
            for k, v in enumerate(nodes):
                w.writerow([sid, int(encoded.positions[sid, k]), v,
                            *(repr(float(x)) for x in encoded.features[sid, k])])
