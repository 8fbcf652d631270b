"""Dynamic graph transformer that scores candidate edges.

Input for one sample is a ``K x d`` sequence, ``K = (C + 2) * T``: each row
is the projected node features plus a two-part learned positional vector
(window position ‖ structural class). The sequence goes through ``L``
attention layers, is mean-pooled into an edge embedding and squashed into an
anomaly probability. A small MLP decoder reconstructs the input sequence from
a copy with one row masked out, for the contextual-consistency loss.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as tn
from ._seeding import derive_rng
from .features import FEATURE_NAMES, relative_class  # noqa: F401 - re-exported
from .tensor import Parameter, Tensor

FEATURE_WEIGHTS = ("w_g", "w_l", "w_t", "w_d", "w_i", "w_c")


@dataclass
class ModelConfig:
    d: int = 32
    heads: int = 2
    layers: int = 2
    C: int = 5
    T: int = 4
    d_ff: int = None
    use_level1: bool = True
    use_level2: bool = True
    use_pe_tmp: bool = True
    use_pe_rel: bool = True
    use_contextual_loss: bool = True
    residual_uses_input: bool = False

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.d
        if self.d % 2:
            raise ValueError(f"d must be even, got {self.d}")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if min(self.heads, self.layers, self.C, self.T, self.d_ff) < 1:
            raise ValueError("heads, layers, C, T and d_ff must be positive")

    @property
    def K(self):
        return (self.C + 2) * self.T

    def to_dict(self):
        return asdict(self)


def _glorot(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_params(config, seed=0):
    """All learnable weights, in a fixed creation order."""
    rng = derive_rng(seed, "init")
    d, h = config.d, config.d_ff
    params = {}

    def mat(name, shape):
        params[name] = Parameter(_glorot(rng, shape), name)

    def const(name, shape, value):
        params[name] = Parameter(np.full(shape, value, dtype=np.float64), name)

    for w in FEATURE_WEIGHTS:
        mat(f"feat.{w}", (1, d))
    mat("pos.w_tmp", (1, d // 2))
    mat("pos.w_rel", (1, d // 2))
    for layer in range(config.layers):
        p = f"layer{layer}."
        for w in ("w_q", "w_k", "w_v", "w_o"):
            mat(p + w, (d, d))
        const(p + "ln1.gain", (d,), 1.0)
        const(p + "ln1.bias", (d,), 0.0)
        mat(p + "ffn.w1", (d, h))
        const(p + "ffn.b1", (h,), 0.0)
        mat(p + "ffn.w2", (h, d))
        const(p + "ffn.b2", (d,), 0.0)
        const(p + "ln2.gain", (d,), 1.0)
        const(p + "ln2.bias", (d,), 0.0)
    mat("scorer.w", (d, 1))
    const("scorer.b", (1,), 0.0)
    mat("decoder.w1", (d, h))
    const("decoder.b1", (h,), 0.0)
    mat("decoder.w2", (h, d))
    const("decoder.b2", (d,), 0.0)
    return params


def _feature_mask(config):
    on1, on2 = float(config.use_level1), float(config.use_level2)
    return np.array([on1, on1, on1, on2, on2, on2])


class STCADModel:
    """Parameters plus the forward computations of the detector."""

    def __init__(self, config=None, seed=0, params=None):
        self.config = config or ModelConfig()
        self.params = params if params is not None else init_params(self.config, seed)

    def parameters(self):
        return list(self.params.values())

    def state_dict(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, arrays):
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, p in self.params.items():
            if arrays[k].shape != p.shape:
                raise ValueError(f"{k}: shape {arrays[k].shape} != {p.shape}")
            p.data = np.array(arrays[k], dtype=np.float64)

    # -- input embedding -----------------------------------------------------

    def feature_embedding(self, features):
        """``(..., 6)`` raw features -> ``(..., d)``; disabled levels contribute zero."""
        P = self.params
        W = tn.concat([P[f"feat.{w}"] for w in FEATURE_WEIGHTS], axis=0)
        return tn.matmul(Tensor(np.asarray(features) * _feature_mask(self.config)), W)

    def positional_encoding(self, positions, rel):
        """``t * w_tmp ‖ rel_class * w_rel`` for every row."""
        P = self.params
        t = np.asarray(positions, dtype=np.float64)[..., None] * float(self.config.use_pe_tmp)
        r = np.asarray(rel, dtype=np.float64)[..., None] * float(self.config.use_pe_rel)
        return tn.concat_last(tn.matmul(Tensor(t), P["pos.w_tmp"]),
                              tn.matmul(Tensor(r), P["pos.w_rel"]))

    def input_sequence(self, features, positions, rel):
        return self.feature_embedding(features) + self.positional_encoding(positions, rel)

    # -- encoder -----------------------------------------------------------------

    def attention(self, h, layer):
        """Multi-head self-attention; returns ``(A, Q, weights)``."""
        P, cfg = self.params, self.config
        p = f"layer{layer}."
        lead = h.shape[:-2]
        K = h.shape[-2]
        nh, dh = cfg.heads, cfg.d // cfg.heads

        def split(x):
            return tn.swapaxes(tn.reshape(x, (*lead, K, nh, dh)), -3, -2)

        q = h @ P[p + "w_q"]
        k = h @ P[p + "w_k"]
        v = h @ P[p + "w_v"]
        logits = (split(q) @ tn.swapaxes(split(k), -1, -2)) * (1.0 / np.sqrt(cfg.d))
        weights = tn.softmax_rows(logits)
        ctx = tn.reshape(tn.swapaxes(weights @ split(v), -3, -2), (*lead, K, cfg.d))
        return ctx @ P[p + "w_o"], q, weights

    def transformer_layer(self, h, layer, return_attention=False):
        P = self.params
        p = f"layer{layer}."
        a, q, weights = self.attention(h, layer)
        residual = h if self.config.residual_uses_input else q
        h1 = tn.layer_norm(a + residual, P[p + "ln1.gain"], P[p + "ln1.bias"])
        ff = tn.relu(h1 @ P[p + "ffn.w1"] + P[p + "ffn.b1"]) @ P[p + "ffn.w2"] + P[p + "ffn.b2"]
        out = tn.layer_norm(ff + h1, P[p + "ln2.gain"], P[p + "ln2.bias"])
        return (out, weights) if return_attention else out

    def encode(self, h, return_attention=False):
        attn = []
        for layer in range(self.config.layers):
            h, w = self.transformer_layer(h, layer, return_attention=True)
            attn.append(w)
        return (h, attn) if return_attention else h

    # -- heads -------------------------------------------------------------------

    def score(self, embedding):
        P = self.params
        return tn.sigmoid(embedding @ P["scorer.w"] + P["scorer.b"])

    def decode(self, h):
        P = self.params
        return tn.relu(h @ P["decoder.w1"] + P["decoder.b1"]) @ P["decoder.w2"] + P["decoder.b2"]

    def forward(self, features, positions, rel):
        """Return ``(scores (B,), edge embeddings (B, d), input sequence (B, K, d))``."""
        h0 = self.input_sequence(features, positions, rel)
        emb = edge_embedding(self.encode(h0))
        scores = tn.reshape(self.score(emb), emb.shape[:-1])
        return scores, emb, h0

    def mask_and_reconstruct(self, seq, mask_index):
        """Zero row ``mask_index`` of each sequence, encode, decode every position."""
        seq = tn.as_tensor(seq)
        K = seq.shape[-2]
        idx = np.broadcast_to(np.asarray(mask_index), seq.shape[:-2])
        if np.any(idx < 0) or np.any(idx >= K):
            raise IndexError(f"mask index out of range [0, {K})")
        keep = np.ones(seq.shape[:-1] + (1,))
        np.put_along_axis(keep, idx[..., None, None], 0.0, axis=-2)
        return self.decode(self.encode(seq * keep))


def edge_embedding(h_out):
    """Mean over the K positions."""
    return tn.mean_rows(h_out)


def aggregate_node_embedding(f, model):
    """Embedding of one node from its six features, shape ``(d,)``."""
    return tn.reshape(model.feature_embedding(np.asarray(f, dtype=np.float64)[None, :]), (model.config.d,))


def positional_encoding(t, rel_class, model):
    if rel_class not in (0, 1, 2):
        raise ValueError(f"rel_class must be 0, 1 or 2, got {rel_class}")
    return tn.reshape(model.positional_encoding(np.array([t]), np.array([rel_class])), (model.config.d,))


def build_input_sequence(features, positions, rel, model):
    """``(K, 6), (K,), (K,) -> (K, d)`` for a single sample."""
    return model.input_sequence(features, positions, rel)


def score_edge(embedding, model):
    return model.score(tn.reshape(tn.as_tensor(embedding), (1, model.config.d))).data.item()
