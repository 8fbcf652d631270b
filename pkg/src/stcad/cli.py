"""Command-line entry point: ``stcad <command> ...``.

Commands: ingest, train, eval, rank, export-embeddings. Reports go to files
(or stdout for ``rank``); diagnostics go to stderr. Exit status is 0 only
when the command completed.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import tensor as tn
from ._seeding import derive_rng
from .config import (
    ABLATIONS,
    ALL_KEYS,
    ConfigError,
    apply_ablations,
    build_configs,
    config_lines,
    parse_lines,
    read_config_file,
)
from .features import FeatureExtractor, write_feature_csv
from .graph import GraphFormatError, load_graph, partition_snapshots, read_edge_file, save_graph
from .metrics import evaluate_scores
from .model import STCADModel
from .sampler import SamplingError, build_sample, build_test_set, write_samples_jsonl
from .training import predict, prepare_data, train, write_run_artifacts

log = logging.getLogger("stcad")


# --- shared helpers -----------------------------------------------------------------

def load_any_graph(path):
    """Edge-list text or STCG binary; returns ``(graph, stored snapshot size or 0)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"STCG":
        return load_graph(path)
    return read_edge_file(path), 0


def _run_values(args):
    """Config file values overlaid with explicit command-line flags."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ALL_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _model_from_checkpoint(path, overrides=None):
    arrays, comments = tn.load_checkpoint(path)
    values = parse_lines(comments, source=f"{path} header")
    values.update(overrides or {})
    mc, tc = build_configs(values)
    model = STCADModel(mc, seed=tc.seed)
    model.load_state_dict(arrays)
    return model, mc, tc


def _graph_and_snapshots(path, tc, explicit_size):
    graph, stored = load_any_graph(path)
    if stored and not explicit_size:
        tc.snapshot_size = stored
    return graph, partition_snapshots(graph, tc.snapshot_size)


def _echo(mc, tc):
    for line in config_lines(mc, tc):
        print(f"# {line}", file=sys.stderr)


# --- commands -----------------------------------------------------------------------

def cmd_ingest(args):
    graph = read_edge_file(args.edges)
    snaps = partition_snapshots(graph, args.snapshot_size)
    save_graph(graph, args.out, snapshot_size=args.snapshot_size)
    print(json.dumps({"nodes": graph.num_nodes, "edges": graph.num_edges, "snapshots": len(snaps),
                      "snapshot_size": args.snapshot_size,
                      "dropped_self_loops": graph.dropped_self_loops}))
    return 0


def cmd_train(args):
    values = apply_ablations(_run_values(args), args.ablate or [])
    mc, tc = build_configs(values)
    graph, stored = load_any_graph(args.graph)
    if stored and "snapshot_size" not in values:
        tc.snapshot_size = stored
    _echo(mc, tc)
    data = prepare_data(graph, mc, tc)
    log.info("%d snapshots, %d training and %d test samples",
             len(data.snapshots), len(data.train), len(data.test))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dump_samples:
        write_samples_jsonl(out / "train_samples.jsonl", data.train_samples)
        write_samples_jsonl(out / "test_samples.jsonl", data.test_samples)
        write_feature_csv(out / "test_features.csv", data.test_samples, data.test)
    model, report = train(graph, mc, tc, data=data)
    write_run_artifacts(out, model, report)
    print(json.dumps({"best_epoch": report.best_epoch, "best_auc": report.best_auc,
                      "best_ap": report.best_ap, "out": str(out)}))
    return 0


def cmd_eval(args):
    overrides = {"inject_rate": args.inject_rate}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.snapshot_size is not None:
        overrides["snapshot_size"] = args.snapshot_size
    model, mc, tc = _model_from_checkpoint(args.checkpoint, overrides)
    graph, snaps = _graph_and_snapshots(args.graph, tc, args.snapshot_size)
    samples = build_test_set(graph, snaps, tc.split_fraction, tc.inject_rate, mc.C, mc.T, tc.seed)
    encoded = FeatureExtractor(snaps, tc.dist_cap, tc.delta_t).encode_all(samples)
    scores, _ = predict(model, encoded)
    result = evaluate_scores(scores, encoded.labels, tc.inject_rate)
    config = {"model": mc.to_dict(), "train": tc.to_dict(), "checkpoint": str(args.checkpoint)}
    text = result.to_json(config) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def _read_candidates(path, graph):
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        fields = raw.replace(",", " ").split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) < 2:
            raise GraphFormatError(f"expected two node labels, got {raw.strip()!r}", lineno)
        try:
            u, v = graph.node_id(fields[0]), graph.node_id(fields[1])
        except KeyError as exc:
            raise GraphFormatError(f"unknown node label {exc.args[0]!r}", lineno) from None
        if u == v:
            raise GraphFormatError("candidate is a self-loop", lineno)
        pairs.append((u, v))
    return pairs


def cmd_rank(args):
    model, mc, tc = _model_from_checkpoint(args.checkpoint,
                                           {"snapshot_size": args.snapshot_size} if args.snapshot_size else None)
    graph, snaps = _graph_and_snapshots(args.graph, tc, args.snapshot_size)
    t = len(snaps) - 1
    if args.candidates:
        pairs = _read_candidates(args.candidates, graph)
    else:
        pairs = list(dict.fromkeys(snaps[t].edges))
    if not pairs:
        raise ValueError("no candidate pairs to rank")
    samples = [build_sample(snaps, t, p, 0, mc.C, mc.T, derive_rng(tc.seed, "context", t, p)) for p in pairs]
    encoded = FeatureExtractor(snaps, tc.dist_cap, tc.delta_t).encode_all(samples)
    scores, _ = predict(model, encoded)
    k = args.top_k
    if k > len(pairs):
        log.warning("top_k=%d exceeds %d candidates; returning all", k, len(pairs))
        k = len(pairs)
    order = np.lexsort((np.arange(len(pairs)), -scores))[:k]
    _echo(mc, tc)
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(["rank", "u", "v", "score"])
    for r, idx in enumerate(order, start=1):
        u, v = pairs[idx]
        w.writerow([r, graph.labels[u], graph.labels[v], repr(float(scores[idx]))])
    return 0


def cmd_export_embeddings(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.inject_rate is not None:
        overrides["inject_rate"] = args.inject_rate
    if args.snapshot_size is not None:
        overrides["snapshot_size"] = args.snapshot_size
    model, mc, tc = _model_from_checkpoint(args.checkpoint, overrides)
    graph, snaps = _graph_and_snapshots(args.graph, tc, args.snapshot_size)
    samples = build_test_set(graph, snaps, tc.split_fraction, tc.inject_rate, mc.C, mc.T, tc.seed)
    encoded = FeatureExtractor(snaps, tc.dist_cap, tc.delta_t).encode_all(samples)
    _, embs = predict(model, encoded)
    with open(args.out, "w", newline="") as fh:
        for line in config_lines(mc, tc):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["edge_id", "label", *(f"e{k}" for k in range(mc.d))])
        for k, (smp, row) in enumerate(zip(samples, embs)):
            w.writerow([k, smp.label, *(repr(float(x)) for x in row)])
    log.info("wrote %d embeddings to %s", len(samples), args.out)
    return 0


# --- argument parsing ---------------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    group = p.add_argument_group("run configuration (override the config file)")
    for key in ALL_KEYS:
        if key in ("loss_lambda", "split_fraction", "resample_negatives_each_epoch"):
            continue
        group.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE")
    group.add_argument("--lambda", dest="loss_lambda", metavar="VALUE", help="contextual loss weight")
    group.add_argument("--train-ratio", dest="split_fraction", metavar="VALUE",
                       help="fraction of snapshots forming the training span")
    group.add_argument("--resample-negatives-each-epoch", dest="resample_negatives_each_epoch",
                       action="store_const", const=True)
    p.add_argument("--ablate", action="append", choices=sorted(ABLATIONS),
                   help="disable a component (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="stcad", description="Edge anomaly detection on dynamic graphs.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an edge list and write a binary graph file")
    p.add_argument("edges")
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot-size", type=int, default=4000)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a detector and write report.json and checkpoints")
    p.add_argument("--graph", required=True, help="edge list or .stcg file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-samples", action="store_true",
                   help="also write samples as JSON lines and test features as CSV")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score an injected test set with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--inject-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshot-size", type=int)
    p.add_argument("--out", help="also write eval.json here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="print the highest-scoring candidate edges")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--candidates", help="file of 'u v' label pairs (default: last-snapshot edges)")
    p.add_argument("--snapshot-size", type=int)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("export-embeddings", help="write test-edge embeddings as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-rate", type=float)
    p.add_argument("--snapshot-size", type=int)
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except (ConfigError, GraphFormatError, SamplingError, ValueError, IndexError, OSError) as exc:
        print(f"stcad {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
