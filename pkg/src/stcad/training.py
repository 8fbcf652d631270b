"""Losses and the end-to-end training loop."""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as tn
from ._seeding import derive_rng
from .features import FeatureExtractor
from .graph import partition_snapshots
from .metrics import evaluate_scores
from .model import ModelConfig, STCADModel
from .sampler import build_test_set, build_training_set

log = logging.getLogger(__name__)

SCORE_CLAMP = 1e-12
KL_FLOOR = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 300
    lr: float = 0.001
    loss_lambda: float = 1.0
    batch_size: int = 128
    seed: int = 0
    inject_rate: float = 0.1
    split_fraction: float = 0.5
    eval_every: int = 10
    snapshot_size: int = 4000
    dist_cap: int = 5
    delta_t: int = 1
    resample_negatives_each_epoch: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss_lambda < 0:
            raise ValueError("loss_lambda must be >= 0")
        if self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("batch_size and eval_every must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainReport:
    config: dict
    epochs: list = field(default_factory=list)
    evals: list = field(default_factory=list)
    best_epoch: int = None
    best_auc: float = None
    best_ap: float = None
    wall_clock: float = None
    best_state: dict = field(default=None, repr=False)

    def to_dict(self, include_timing=False):
        doc = {"config": self.config, "epochs": self.epochs, "evals": self.evals,
               "best_epoch": self.best_epoch, "best_auc": self.best_auc, "best_ap": self.best_ap}
        if include_timing:
            doc["wall_clock"] = self.wall_clock
        return doc

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=2)


# --- losses -------------------------------------------------------------------

def discriminative_loss(scores, labels):
    """Mean binary cross-entropy; label 1 (anomaly) pulls the score towards 1."""
    scores = tn.as_tensor(scores)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != scores.shape:
        raise ValueError(f"scores {scores.shape} vs labels {y.shape}")
    s = tn.clamp(scores, SCORE_CLAMP, 1 - SCORE_CLAMP)
    ll = tn.log(s, SCORE_CLAMP) * y + tn.log(1.0 - s, SCORE_CLAMP) * (1.0 - y)
    return -tn.mean(ll)


def contextual_loss(original, reconstruction):
    """Row-softmax KL(original ‖ reconstruction), summed over positions, averaged over the batch."""
    original, reconstruction = tn.as_tensor(original), tn.as_tensor(reconstruction)
    if original.shape != reconstruction.shape:
        raise ValueError(f"shape mismatch {original.shape} vs {reconstruction.shape}")
    p = tn.softmax_rows(original)
    q = tn.softmax_rows(reconstruction)
    kl = tn.sum(p * (tn.log(p, KL_FLOOR) - tn.log(q, KL_FLOOR)), axis=-1)
    per_seq = tn.sum(kl, axis=-1)
    return tn.mean(per_seq)


def total_loss(l_dis, l_con, loss_lambda=1.0):
    if l_con is None or loss_lambda == 0:
        return l_dis
    return l_dis + l_con * float(loss_lambda)


# --- data -----------------------------------------------------------------------

@dataclass
class PreparedData:
    snapshots: list
    extractor: FeatureExtractor
    train_samples: list
    test_samples: list
    train: object
    test: object


def prepare_data(graph, model_config, train_config, accept=None):
    """Snapshots, features and encoded train/test sets.

    ``accept`` optionally restricts which never-occurring pairs may be
    injected into the test set.
    """
    mc, tc = model_config, train_config
    snapshots = partition_snapshots(graph, tc.snapshot_size)
    extractor = FeatureExtractor(snapshots, tc.dist_cap, tc.delta_t)
    train_samples = build_training_set(graph, snapshots, tc.split_fraction, mc.C, mc.T, tc.seed)
    test_samples = build_test_set(graph, snapshots, tc.split_fraction, tc.inject_rate, mc.C, mc.T,
                                  tc.seed, accept=accept)
    return PreparedData(snapshots, extractor, train_samples, test_samples,
                        extractor.encode_all(train_samples), extractor.encode_all(test_samples))


def predict(model, encoded, batch_size=512):
    """Anomaly scores and edge embeddings for an encoded set."""
    scores, embs = [], []
    with tn.no_grad():
        for lo in range(0, len(encoded), batch_size):
            b = encoded.take(slice(lo, lo + batch_size))
            s, e, _ = model.forward(b.features, b.positions, b.rel)
            scores.append(s.data)
            embs.append(e.data)
    return np.concatenate(scores), np.concatenate(embs)


def evaluate(model, encoded, inject_rate=None):
    scores, _ = predict(model, encoded)
    return evaluate_scores(scores, encoded.labels, inject_rate)


# --- loop -----------------------------------------------------------------------

def run_config_dict(model_config, train_config):
    return {"model": model_config.to_dict(), "train": train_config.to_dict()}


def train(graph, model_config=None, train_config=None, data=None, accept=None):
    """Train a detector on ``graph``; returns ``(model, report)``.

    Samples and features are computed once before the epoch loop (pass
    ``data`` to reuse a :class:`PreparedData`). Every ``eval_every`` epochs,
    and after the last one, the test set is scored; the report keeps the best
    AUC and AP over those evaluations and the parameters of the best-AUC epoch.
    """
    mc = model_config or ModelConfig()
    tc = train_config or TrainConfig()
    start = time.perf_counter()
    if data is None:
        data = prepare_data(graph, mc, tc, accept)
    train_set = data.train
    model = STCADModel(mc, seed=tc.seed)
    params = model.parameters()
    use_con = mc.use_contextual_loss and tc.loss_lambda > 0
    report = TrainReport(config=run_config_dict(mc, tc))
    best_key = None

    for epoch in range(1, tc.epochs + 1):
        if tc.resample_negatives_each_epoch and epoch > 1:
            samples = build_training_set(graph, data.snapshots, tc.split_fraction, mc.C, mc.T, tc.seed,
                                         tag=("train-negatives", epoch))
            train_set = data.extractor.encode_all(samples)
        n = len(train_set)
        perm = derive_rng(tc.seed, "shuffle", epoch).permutation(n)
        mask_idx = derive_rng(tc.seed, "mask", epoch).integers(mc.K, size=n)
        sums = np.zeros(3)
        for lo in range(0, n, tc.batch_size):
            idx = perm[lo:lo + tc.batch_size]
            b = train_set.take(idx)
            scores, _, h0 = model.forward(b.features, b.positions, b.rel)
            l_dis = discriminative_loss(scores, b.labels)
            l_con = None
            if use_con:
                l_con = contextual_loss(h0, model.mask_and_reconstruct(h0, mask_idx[idx]))
            loss = total_loss(l_dis, l_con, tc.loss_lambda)
            sums += len(idx) * np.array([l_dis.item(), l_con.item() if l_con is not None else 0.0,
                                         loss.item()])
            tn.backward(loss)
            tn.adam_step(params, lr=tc.lr)
        l_dis_m, l_con_m, loss_m = (sums / n).tolist()
        report.epochs.append({"epoch": epoch, "l_dis": l_dis_m, "l_con": l_con_m, "loss": loss_m})

        if epoch % tc.eval_every == 0 or epoch == tc.epochs:
            res = evaluate(model, data.test, tc.inject_rate)
            report.evals.append({"epoch": epoch, **res.to_dict()})
            log.info("epoch %d loss %.4f auc %.4f ap %.4f", epoch, loss_m, res.auc, res.ap)
            key = (res.auc, res.ap)
            if best_key is None or key > best_key:
                best_key = key
                report.best_epoch = epoch
                report.best_state = model.state_dict()
            report.best_auc = max(e["auc"] for e in report.evals)
            report.best_ap = max(e["ap"] for e in report.evals)

    report.wall_clock = time.perf_counter() - start
    return model, report


def config_comments(config):
    """Flatten a nested config dict into ``key = value`` lines."""
    lines = []
    for section, values in config.items():
        if isinstance(values, dict):
            lines += [f"{k} = {v}" for k, v in values.items()]
        else:
            lines.append(f"{section} = {values}")
    return lines


def write_run_artifacts(out_dir, model, report):
    """``report.json``, ``best.ckpt`` and ``final.ckpt`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comments = config_comments(report.config)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "timing.json").write_text(json.dumps({"wall_clock": report.wall_clock}) + "\n")
    if report.best_state is not None:
        tn.save_checkpoint(out / "best.ckpt", report.best_state, comments)
    tn.save_checkpoint(out / "final.ckpt", model.params, comments)
