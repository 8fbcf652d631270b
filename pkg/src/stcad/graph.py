"""Dynamic graph storage: edge-stream parsing, snapshots and structural queries.

Graphs are undirected and unweighted. A pair of nodes observed at several
timestamps yields several edge instances; inside a snapshot those duplicates
collapse for adjacency purposes but stay in the instance list.
"""

import logging
import re
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"STCG"
FORMAT_VERSION = 1

_SPLIT = re.compile(r"[,\s]+")


class GraphFormatError(ValueError):
    """Malformed edge stream or graph file."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def pair_key(u, v):
    """Canonical unordered key for the node pair ``{u, v}``."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True, eq=False)
class DynamicGraph:
    """Timestamped multiset of undirected edges over dense node ids.

    ``src``, ``dst`` and ``timestamps`` are parallel arrays sorted by
    timestamp (stable). ``labels[k]`` is the original id of dense node ``k``.
    ``first_seen`` maps each canonical pair to the index of its earliest
    instance.
    """

    labels: tuple
    src: np.ndarray
    dst: np.ndarray
    timestamps: np.ndarray
    first_seen: dict = field(repr=False)
    dropped_self_loops: int = 0

    @classmethod
    def from_edges(cls, edges, labels=None, dropped_self_loops=0):
        """Build from ``(u, v, t)`` triples already in dense ids."""
        edges = list(edges)
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        ts = np.array([e[2] for e in edges], dtype=np.float64)
        order = np.argsort(ts, kind="stable")
        src, dst, ts = src[order], dst[order], ts[order]
        if labels is None:
            n = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
            labels = tuple(str(k) for k in range(n))
        first_seen = {}
        for k, (u, v) in enumerate(zip(src.tolist(), dst.tolist())):
            first_seen.setdefault(pair_key(u, v), k)
        for a in (src, dst, ts):
            a.setflags(write=False)
        return cls(tuple(labels), src, dst, ts, first_seen, dropped_self_loops)

    @property
    def num_nodes(self):
        return len(self.labels)

    @property
    def num_edges(self):
        return len(self.src)

    @property
    def nodes(self):
        return range(self.num_nodes)

    @property
    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.timestamps.tolist()))

    @cached_property
    def _label_index(self):
        return {lab: k for k, lab in enumerate(self.labels)}

    def node_id(self, label):
        """Dense id of an original node label."""
        return self._label_index[str(label)]

    def ever_connected(self, u, v):
        return pair_key(u, v) in self.first_seen


def parse_edge_stream(source):
    """Parse ``source target timestamp`` lines into a :class:`DynamicGraph`.

    ``source`` is either the full text or an iterable of lines. Fields may be
    separated by whitespace or commas. A four-field line is read as
    ``source target weight timestamp`` with the weight discarded. Lines that
    are blank or start with ``#`` or ``%`` are skipped. Self-loops are dropped.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    raw = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line[0] in "#%":
            continue
        parts = _SPLIT.split(line)
        if len(parts) not in (3, 4):
            raise GraphFormatError(f"expected 'source target timestamp', got {len(parts)} field(s)", lineno)
        try:
            ts = float(parts[-1])
        except ValueError:
            raise GraphFormatError(f"timestamp {parts[-1]!r} is not numeric", lineno) from None
        if not np.isfinite(ts):
            raise GraphFormatError(f"timestamp {parts[-1]!r} is not finite", lineno)
        raw.append((parts[0], parts[1], ts))
    if not raw:
        raise GraphFormatError("no edges")

    raw.sort(key=lambda e: e[2])  # stable
    ids = {}
    edges = []
    loops = 0
    for a, b, ts in raw:
        if a == b:
            loops += 1
            continue
        u = ids.setdefault(a, len(ids))
        v = ids.setdefault(b, len(ids))
        edges.append((u, v, ts))
    if loops:
        log.warning("dropped %d self-loop(s)", loops)
    if not edges:
        raise GraphFormatError("no edges")
    return DynamicGraph.from_edges(edges, labels=tuple(ids), dropped_self_loops=loops)


def read_edge_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_edge_stream(fh)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One block of consecutive edge instances, viewed as a simple graph."""

    index: int
    edges: tuple
    adjacency: dict = field(repr=False)
    edge_set: frozenset = field(repr=False)

    @classmethod
    def from_pairs(cls, index, pairs, isolated=()):
        pairs = tuple((int(u), int(v)) for u, v in pairs)
        adj = {}
        for u, v in pairs:
            if u == v:
                continue
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        for v in isolated:
            adj.setdefault(int(v), set())
        adjacency = {v: frozenset(nb) for v, nb in adj.items()}
        edge_set = frozenset(pair_key(u, v) for u, v in pairs if u != v)
        return cls(index, pairs, adjacency, edge_set)

    @property
    def node_set(self):
        return self.adjacency.keys()

    def __len__(self):
        return len(self.edges)

    def neighbors(self, v):
        return self.adjacency.get(v, frozenset())

    def degree(self, v):
        return len(self.adjacency.get(v, ()))

    def has_edge(self, u, v):
        return pair_key(u, v) in self.edge_set


def neighbors(s, v):
    return s.neighbors(v)


def degree(s, v):
    return s.degree(v)


def partition_snapshots(graph, snapshot_size):
    """Split the edge stream into consecutive blocks of ``snapshot_size`` instances.

    The final block may be shorter. Adjacency of each snapshot is built from
    its own block only.
    """
    snapshot_size = int(snapshot_size)
    if snapshot_size < 1:
        raise ValueError("snapshot_size must be >= 1")
    src, dst = graph.src.tolist(), graph.dst.tolist()
    return [
        Snapshot.from_pairs(k, zip(src[lo:lo + snapshot_size], dst[lo:lo + snapshot_size]))
        for k, lo in enumerate(range(0, graph.num_edges, snapshot_size))
    ]


def first_occurrence_snapshot(pair, snapshots):
    """Smallest index of a snapshot containing ``pair``, or ``None``."""
    key = pair_key(*pair)
    for s in snapshots:
        if key in s.edge_set:
            return s.index
    return None


def first_occurrence_index(snapshots):
    """Map every pair that ever occurs to its first snapshot index."""
    first = {}
    for s in snapshots:
        for key in s.edge_set:
            first.setdefault(key, s.index)
    return first


# --- STCG binary format -----------------------------------------------------
#
#   header  : magic "STCG" | u32 version | u32 n_nodes | u64 n_edges
#             | u32 snapshot_size (0 = unpartitioned) | u32 dropped_self_loops
#   labels  : n_nodes x (u32 byte length | utf-8 bytes)
#   edges   : i64[n_edges] src | i64[n_edges] dst | f64[n_edges] timestamp
#
# All integers and floats little-endian.

_HEADER = struct.Struct("<4sIIQII")


def save_graph(graph, path, snapshot_size=0):
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, graph.num_nodes, graph.num_edges,
                           int(snapshot_size), graph.dropped_self_loops)]
    for lab in graph.labels:
        b = lab.encode("utf-8")
        chunks.append(struct.pack("<I", len(b)))
        chunks.append(b)
    chunks.append(graph.src.astype("<i8").tobytes())
    chunks.append(graph.dst.astype("<i8").tobytes())
    chunks.append(graph.timestamps.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_graph(path):
    """Read an STCG file; returns ``(graph, snapshot_size)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise GraphFormatError(f"{path}: not an STCG graph file")
    magic, version, n_nodes, n_edges, snapshot_size, loops = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise GraphFormatError(f"{path}: unsupported STCG version {version}")
    off = _HEADER.size
    labels = []
    try:
        for _ in range(n_nodes):
            (n,) = struct.unpack_from("<I", data, off)
            off += 4
            labels.append(data[off:off + n].decode("utf-8"))
            off += n
        src = np.frombuffer(data, "<i8", n_edges, off)
        off += 8 * n_edges
        dst = np.frombuffer(data, "<i8", n_edges, off)
        off += 8 * n_edges
        ts = np.frombuffer(data, "<f8", n_edges, off)
    except (struct.error, ValueError) as exc:
        raise GraphFormatError(f"{path}: truncated STCG file") from exc
    edges = zip(src.tolist(), dst.tolist(), ts.tolist())
    return DynamicGraph.from_edges(edges, labels=labels, dropped_self_loops=loops), snapshot_size
