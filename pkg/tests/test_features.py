import csv

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_pagerank, floyd_warshall
from stcad.features import (
    FeatureExtractor,
    coupling_features,
    endpoint_distance,
    level1_features,
    pagerank,
    relative_class,
    shortest_distance,
    write_feature_csv,
)
from stcad.graph import Snapshot
from stcad.sampler import EdgeSample


def random_snapshot(rng, n, p):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Snapshot.from_pairs(0, pairs, isolated=range(n)), pairs


def test_pagerank_two_nodes():
    pr = pagerank(Snapshot.from_pairs(0, [(0, 1)]))
    assert pr[0] == pytest.approx(0.5, abs=1e-12)
    assert pr[1] == pytest.approx(0.5, abs=1e-12)


def test_pagerank_isolated_node():
    assert pagerank(Snapshot.from_pairs(0, [], isolated=[7])) == {7: pytest.approx(1.0)}


def test_pagerank_star_matches_dense_oracle():
    pairs = [(0, 1), (0, 2)]
    pr = pagerank(Snapshot.from_pairs(0, pairs))
    ref = dense_pagerank([0, 1, 2], pairs)
    for v in ref:
        assert abs(pr[v] - ref[v]) < 1e-8


def test_pagerank_matches_networkx():
    rng = np.random.default_rng(3)
    s, pairs = random_snapshot(rng, 25, 0.15)
    G = nx.Graph()
    G.add_nodes_from(range(25))
    G.add_edges_from(pairs)
    ref = nx.pagerank(G, alpha=0.85, tol=1e-14, max_iter=10_000)
    pr = pagerank(s)
    assert max(abs(pr[v] - ref[v]) for v in ref) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.floats(0.0, 0.5), st.integers(0, 10_000))
def test_pagerank_normalised_and_positive(n, p, seed):
    s, _ = random_snapshot(np.random.default_rng(seed), n, p)
    pr = pagerank(s)
    assert abs(sum(pr.values()) - 1) < 1e-9
    assert min(pr.values()) > 0


def test_distance_trivial_cases():
    s = Snapshot.from_pairs(0, [(0, 1), (1, 2)])
    assert shortest_distance(s, 1, 1) == 0
    assert shortest_distance(s, 0, 1) == 1
    assert shortest_distance(s, 0, 2) == 2
    assert shortest_distance(s, 0, 99) == 5
    long_path = Snapshot.from_pairs(0, [(k, k + 1) for k in range(10)])
    assert shortest_distance(long_path, 0, 9, dist_cap=5) == 5
    assert shortest_distance(long_path, 0, 4, dist_cap=5) == 4


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.floats(0.02, 0.3), st.integers(1, 7), st.integers(0, 10_000))
def test_distance_matches_floyd_warshall(n, p, cap, seed):
    s, pairs = random_snapshot(np.random.default_rng(seed), n, p)
    ref = floyd_warshall(n, pairs, cap)
    for a in range(n):
        for b in range(n):
            d = shortest_distance(s, a, b, cap)
            assert d == ref[a, b]
            assert d == shortest_distance(s, b, a, cap)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 20), st.floats(0.05, 0.4), st.integers(0, 10_000))
def test_endpoint_distance_is_min_of_two(n, p, seed):
    s, _ = random_snapshot(np.random.default_rng(seed), n, p)
    for v in range(n):
        assert endpoint_distance(s, v, (0, 1)) == min(shortest_distance(s, v, 0), shortest_distance(s, v, 1))


def test_level1_features():
    snaps = [Snapshot.from_pairs(k, [(5, 6)] + ([(0, 1), (1, 2)] if k >= 2 else [])) for k in range(5)]
    prs = [pagerank(s) for s in snaps]
    f_glo, f_loc, f_tmp = level1_features(snaps, (0, 1), 2, 4, prs)
    assert f_tmp == 2
    assert f_loc == 1
    assert f_glo == pytest.approx(prs[4][2])
    assert level1_features(snaps, (0, 1), 0, 4, prs)[1] == 0
    # before the pair exists, and for a pair that never exists
    assert level1_features(snaps, (0, 1), 0, 1, prs)[2] == 0
    assert level1_features(snaps, (0, 3), 0, 4, prs)[2] == 0


def test_coupling_distance_change():
    prev = Snapshot.from_pairs(0, [(0, 2), (2, 1)])
    cur = Snapshot.from_pairs(1, [(0, 1)])
    ref = floyd_warshall(3, [(0, 2), (2, 1)], 5)[0, 1]
    f_dc, _, _ = coupling_features([prev, cur], (0, 1), 1)
    assert f_dc == ref - 1 == 1


def test_coupling_interaction_change():
    prev = Snapshot.from_pairs(0, [(0, 2), (0, 3), (1, 4), (1, 5)])
    cur = Snapshot.from_pairs(1, [(0, 2), (0, 3), (0, 6), (1, 4), (1, 5)])
    assert cur.degree(0) == 3 and cur.degree(1) == 2
    _, f_ic, _ = coupling_features([prev, cur], (0, 1), 1)
    assert f_ic == 1


def test_coupling_neighbor_change():
    a, b = 10, 11
    prev = Snapshot.from_pairs(0, [(0, a), (1, a)])
    cur = Snapshot.from_pairs(1, [(0, a), (1, a), (0, b), (1, b)])
    assert coupling_features([prev, cur], (0, 1), 1)[2] == 1


def test_coupling_zero_without_history():
    s = Snapshot.from_pairs(0, [(0, 1)])
    assert coupling_features([s], (0, 1), 0) == (0, 0, 0)


def test_relative_class():
    s = Snapshot.from_pairs(0, [(0, 1), (0, 2), (1, 2), (0, 3)])
    assert relative_class(s, (0, 1), 0) == 0
    assert relative_class(s, (0, 1), 2) == 1
    assert relative_class(s, (0, 1), 3) == 2


def _toy_snaps():
    rng = np.random.default_rng(0)
    return [Snapshot.from_pairs(k, [tuple(rng.choice(12, 2, replace=False)) for _ in range(20)])
            for k in range(5)]


def test_encode_broadcasts_edge_features():
    snaps = _toy_snaps()
    ex = FeatureExtractor(snaps)
    u, v = snaps[4].edges[0]
    window = tuple((u, v, 1, 2, 3) for _ in range(3))
    feats, pos, rel = ex.encode(EdgeSample((u, v), 0, window, 4))
    assert feats.shape == (15, 6)
    assert pos.tolist() == [0] * 5 + [1] * 5 + [2] * 5
    for p in range(3):
        block = feats[5 * p:5 * p + 5]
        assert np.all(block[:, 3:] == block[0, 3:])
        assert np.all(block[:, 2] == block[0, 2])
    assert np.all(feats >= 0)
    assert np.all(np.isfinite(feats))
    assert rel[0] == rel[1] == 0
    # encode agrees with the per-node API
    for k, node in enumerate([n for seq in window for n in seq]):
        t = 2 + k // 5
        assert tuple(feats[k]) == pytest.approx(tuple(ex.node_features((u, v), node, t)))


def test_feature_csv(tmp_path):
    snaps = _toy_snaps()
    ex = FeatureExtractor(snaps)
    u, v = snaps[4].edges[0]
    samples = [EdgeSample((u, v), 0, ((u, v, u), (u, v, v)), 4)]
    enc = ex.encode_all(samples)
    path = tmp_path / "f.csv"
    write_feature_csv(path, samples, enc)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["sample_id", "t", "node", "f_glo", "f_loc", "f_tmp", "f_dc", "f_ic", "f_nc"]
    assert len(rows) == 1 + 6
