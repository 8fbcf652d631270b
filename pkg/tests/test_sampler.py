import numpy as np
import pytest

from stcad._seeding import derive_rng
from stcad.graph import DynamicGraph, Snapshot, pair_key, partition_snapshots
from stcad.sampler import (
    SamplingError,
    build_sample,
    build_test_set,
    build_training_set,
    eval_span,
    injected_count,
    sample_context,
    sample_negative_edge,
    train_span,
    write_samples_jsonl,
)


def rng():
    return np.random.default_rng(0)


def test_context_from_large_pool():
    s = Snapshot.from_pairs(0, [(0, k) for k in range(2, 6)] + [(1, k) for k in range(5, 9)])
    ctx = sample_context(s, (0, 1), 5, rng())
    assert len(set(ctx)) == 5
    assert set(ctx) <= set(range(2, 9))


def test_context_padding():
    s = Snapshot.from_pairs(0, [(0, 10), (1, 11)])
    assert sample_context(s, (0, 1), 5, rng()) == [10, 11, 0, 1, 0]


def test_context_absent_endpoints():
    s = Snapshot.from_pairs(0, [(5, 6)])
    assert sample_context(s, (0, 1), 5, rng()) == [0, 1, 0, 1, 0]


def test_context_rejects_zero():
    with pytest.raises(ValueError):
        sample_context(Snapshot.from_pairs(0, [(0, 1)]), (0, 1), 0, rng())


def _snaps(n=6):
    r = np.random.default_rng(1)
    return [Snapshot.from_pairs(k, [tuple(r.choice(15, 2, replace=False)) for _ in range(12)]) for k in range(n)]


def test_build_sample_shape():
    snaps = _snaps()
    smp = build_sample(snaps, 4, (0, 1), 1, 5, 4, rng())
    assert len(smp.window) == 4
    assert all(len(seq) == 7 and seq[:2] == (0, 1) for seq in smp.window)
    assert sum(len(seq) for seq in smp.window) == 28
    single = build_sample(snaps, 0, (0, 1), 0, 5, 1, rng())
    assert len(single.window) == 1


def test_build_sample_insufficient_history():
    with pytest.raises(ValueError, match="insufficient history"):
        build_sample(_snaps(), 1, (0, 1), 0, 5, 4, rng())


def test_context_stays_in_neighbourhood():
    snaps = _snaps()
    for t in range(3, 6):
        for u, v in snaps[t].edges:
            smp = build_sample(snaps, t, (u, v), 0, 5, 4, derive_rng(0, t, u, v))
            for p, seq in enumerate(smp.window):
                s = snaps[t - 3 + p]
                allowed = s.neighbors(u) | s.neighbors(v) | {u, v}
                assert set(seq) <= allowed


def test_negative_from_complement():
    g = DynamicGraph.from_edges([(0, 1, 0.0)], labels=("a", "b", "c", "d"))
    r = rng()
    allowed = {(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}
    seen = {sample_negative_edge(g, r) for _ in range(10_000)}
    assert seen == allowed


def test_negative_never_occurs():
    g = DynamicGraph.from_edges([(u, (u * 7 + 3) % 30, float(u)) for u in range(30) if u != (u * 7 + 3) % 30])
    r = rng()
    for _ in range(10_000):
        assert sample_negative_edge(g, r) not in g.first_seen


def test_negative_complete_graph():
    g = DynamicGraph.from_edges([(0, 1, 0.0), (1, 2, 1.0), (0, 2, 2.0)])
    with pytest.raises(SamplingError):
        sample_negative_edge(g, rng())


def test_spans():
    assert list(train_span(15, 0.5, 4)) == [3, 4, 5, 6]
    assert list(eval_span(15, 0.5, 4)) == list(range(7, 15))
    assert list(train_span(15, 0.2, 2)) == [1, 2]
    with pytest.raises(ValueError):
        train_span(15, 0.0, 4)


@pytest.mark.parametrize("count,rate,expected", [(1000, 0.10, 100), (50, 0.01, 1), (4000, 0.05, 200),
                                                 (4000, 0.01, 40), (3798, 0.1, 380)])
def test_injected_count(count, rate, expected):
    assert injected_count(count, rate) == expected


def _graph():
    r = np.random.default_rng(5)
    edges = []
    for k in range(800):
        u, v = r.choice(60, 2, replace=False)
        edges.append((int(u), int(v), float(k)))
    return DynamicGraph.from_edges(edges)


def test_training_set_balanced():
    g = _graph()
    snaps = partition_snapshots(g, 100)
    samples = build_training_set(g, snaps, 0.5, 5, 2, seed=3)
    by_t = {}
    for smp in samples:
        by_t.setdefault(smp.window_end, []).append(smp.label)
    assert sorted(by_t) == [1, 2, 3]
    for labels in by_t.values():
        assert labels.count(0) == labels.count(1) == 100
    for smp in samples:
        if smp.label == 1:
            assert pair_key(*smp.central) not in g.first_seen


def test_test_set_injection():
    g = _graph()
    snaps = partition_snapshots(g, 100)
    samples = build_test_set(g, snaps, 0.5, 0.05, 5, 2, seed=3)
    assert {s.window_end for s in samples} == {4, 5, 6, 7}
    pos = [s for s in samples if s.label == 1]
    assert len(pos) == 4 * 5
    every = set().union(*(s.edge_set for s in snaps))
    assert all(pair_key(*s.central) not in every for s in pos)
    with pytest.raises(ValueError, match="no positives"):
        build_test_set(g, snaps, 0.5, 0.0, 5, 2, seed=3)


def test_no_eligible_snapshot():
    g = _graph()
    snaps = partition_snapshots(g, 400)
    with pytest.raises(ValueError, match="no eligible"):
        build_training_set(g, snaps, 0.5, 5, 4, seed=0)


def test_samples_deterministic(tmp_path):
    g = _graph()
    snaps = partition_snapshots(g, 100)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_samples_jsonl(a, build_training_set(g, snaps, 0.5, 5, 2, seed=9))
    write_samples_jsonl(b, build_training_set(g, snaps, 0.5, 5, 2, seed=9))
    assert a.read_bytes() == b.read_bytes()
    write_samples_jsonl(b, build_training_set(g, snaps, 0.5, 5, 2, seed=10))
    assert a.read_bytes() != b.read_bytes()
