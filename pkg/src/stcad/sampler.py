"""Labelled edge samples with per-snapshot one-hop context windows.

Normal samples (label 0) are the existing edge instances of a snapshot;
anomalous samples (label 1) are node pairs that never occur in any snapshot.
"""

import json
import math
from dataclasses import dataclass

from ._seeding import derive_rng
from .graph import pair_key


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EdgeSample:
    """A candidate edge and its context window.

    ``window[p]`` is ``(i, j, c_1, ..., c_C)`` for snapshot
    ``window_end - T + 1 + p``.
    """

    central: tuple
    label: int
    window: tuple
    window_end: int

    def to_json(self):
        return json.dumps({"central": list(self.central), "label": self.label,
                           "window_end": self.window_end,
                           "window": [list(seq) for seq in self.window]})


def sample_context(s, central, C, rng):
    """Draw ``C`` context nodes from the one-hop neighbourhood of ``central`` in ``s``.

    Short pools are padded by alternating the endpoints ``i, j, i, ...``.
    """
    if C < 1:
        raise ValueError("C must be >= 1")
    i, j = central
    pool = sorted((s.neighbors(i) | s.neighbors(j)) - {i, j})
    if len(pool) >= C:
        return [pool[k] for k in rng.choice(len(pool), size=C, replace=False)]
    return pool + [(i, j)[k % 2] for k in range(C - len(pool))]


def build_sample(snapshots, window_end, central, label, C, T, rng):
    if window_end < T - 1:
        raise ValueError(f"insufficient history: window_end={window_end} needs T-1={T - 1} earlier snapshots")
    if window_end >= len(snapshots):
        raise IndexError(f"window_end {window_end} out of range")
    i, j = central
    window = tuple(
        (i, j, *sample_context(snapshots[t], central, C, rng))
        for t in range(window_end - T + 1, window_end + 1)
    )
    return EdgeSample((i, j), int(label), window, window_end)


def sample_negative_edge(graph, rng, max_tries=10_000, accept=None):
    """Uniform node pair that never occurs anywhere in ``graph``.

    ``accept`` optionally restricts candidates further (called with the
    canonical pair).
    """
    n = graph.num_nodes
    if n < 2:
        raise SamplingError("need at least two nodes")
    if len(graph.first_seen) >= n * (n - 1) // 2:
        raise SamplingError("graph is complete; no never-occurring pair exists")
    for _ in range(max_tries):
        u, v = rng.integers(n, size=2).tolist()
        if u == v:
            continue
        key = pair_key(u, v)
        if key in graph.first_seen or (accept is not None and not accept(key)):
            continue
        return key
    raise SamplingError(f"no never-occurring pair found in {max_tries} tries")


def train_span(n_snapshots, split_fraction, T):
    if not 0 < split_fraction <= 1:
        raise ValueError("split_fraction must be in (0, 1]")
    return range(T - 1, math.floor(split_fraction * n_snapshots))


def eval_span(n_snapshots, split_fraction, T):
    if not 0 < split_fraction <= 1:
        raise ValueError("split_fraction must be in (0, 1]")
    return range(max(math.floor(split_fraction * n_snapshots), T - 1), n_snapshots)


def _snapshot_samples(graph, snapshots, t, n_negative, C, T, seed, tag, accept):
    out = []
    for u, v in snapshots[t].edges:
        rng = derive_rng(seed, "context", t, (u, v))
        out.append(build_sample(snapshots, t, (u, v), 0, C, T, rng))
    neg_rng = derive_rng(seed, tag, t)
    for _ in range(n_negative):
        pair = sample_negative_edge(graph, neg_rng, accept=accept)
        rng = derive_rng(seed, "context", t, pair)
        out.append(build_sample(snapshots, t, pair, 1, C, T, rng))
    return out


def build_training_set(graph, snapshots, split_fraction, C, T, seed, tag="train-negatives", accept=None):
    """Balanced samples from every eligible snapshot of the training span.

    Each snapshot contributes all of its edge instances as normal samples
    and as many injected pairs as anomalies.
    """
    span = train_span(len(snapshots), split_fraction, T)
    if len(span) == 0:
        raise ValueError(f"no eligible training snapshot: {len(snapshots)} snapshots, "
                         f"split_fraction={split_fraction}, T={T}")
    samples = []
    for t in span:
        samples += _snapshot_samples(graph, snapshots, t, len(snapshots[t].edges), C, T, seed, tag, accept)
    return samples


def injected_count(n_edges, inject_rate):
    return math.ceil(round(inject_rate * n_edges, 9))


def build_test_set(graph, snapshots, split_fraction, inject_rate, C, T, seed, accept=None):
    """All edge instances of each test snapshot plus ``ceil(rate * count)`` injected pairs."""
    if not 0 < inject_rate < 1:
        raise ValueError(f"inject_rate must be in (0, 1), got {inject_rate}: no positives")
    span = eval_span(len(snapshots), split_fraction, T)
    if len(span) == 0:
        raise ValueError(f"no eligible test snapshot: {len(snapshots)} snapshots, "
                         f"split_fraction={split_fraction}, T={T}")
    samples = []
    for t in span:
        n_neg = injected_count(len(snapshots[t].edges), inject_rate)
        samples += _snapshot_samples(graph, snapshots, t, n_neg, C, T, seed,
                                     ("test-negatives", inject_rate), accept)
    return samples


def write_samples_jsonl(path, samples):
    with open(path, "w") as fh:
        for smp in samples:
            fh.write(smp.to_json() + "\n")
