"""ROC-AUC and average precision, anomalies (label 1) as the positive class."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class EvalResult:
    auc: float
    ap: float
    n_pos: int
    n_neg: int
    inject_rate: float = None

    def to_dict(self):
        return asdict(self)

    def to_json(self, config=None):
        doc = self.to_dict()
        if config is not None:
            doc["config"] = config
        return json.dumps(doc, indent=2)


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores vs {labels.size} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(bool)


def roc_auc(scores, labels):
    """Rank-sum AUC with midranks for ties."""
    scores, pos = _check(scores, labels)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def average_precision(scores, labels):
    """Step-sum of precision over recall increments along the ranking.

    Ranking is by descending score; ties put negatives first, then by index.
    """
    scores, pos = _check(scores, labels)
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise ValueError("average_precision needs at least one positive: no positives")
    order = np.lexsort((np.arange(scores.size), pos, -scores))
    hits = pos[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].sum() / n_pos)


def evaluate_scores(scores, labels, inject_rate=None):
    labels = np.asarray(labels)
    return EvalResult(roc_auc(scores, labels), average_precision(scores, labels),
                      int((labels == 1).sum()), int((labels == 0).sum()), inject_rate)
