"""Shared test machinery built on the oracles."""

import numpy as np

from oracles import finite_difference, relative_error
from stcad import tensor as tt
from stcad.tensor import Parameter


def grad_check(build, shapes, seed=0, positive=False, tol=1e-4):
    """Compare analytic gradients of ``sum(build(*ps) * w)`` against central differences.

    Returns the worst relative error seen.
    """
    rng = np.random.default_rng(seed)
    arrays = [rng.uniform(0.2, 1.5, s) if positive else rng.normal(size=s) for s in shapes]
    params = [Parameter(a, f"p{k}") for k, a in enumerate(arrays)]
    out_shape = build(*params).shape
    w = rng.normal(size=out_shape)

    def f():
        with tt.no_grad():
            return float((build(*params).data * w).sum())

    tt.backward(tt.sum(tt.mul(build(*params), w)))
    worst = 0.0
    for p in params:
        for idx in np.ndindex(p.shape):
            num = finite_difference(f, p.data, idx)
            err = relative_error(p.grad[idx], num)
            assert err < tol, (p.name, idx, p.grad[idx], num)
            worst = max(worst, err)
    return worst


def model_grad_check(model, feats, pos, rel, labels, mask, per_group=10, seed=0, tol=1e-4):
    """Finite-difference check of the full loss on a random subset of each parameter group."""
    from stcad.training import contextual_loss, discriminative_loss, total_loss

    def loss_fn():
        scores, _, h0 = model.forward(feats, pos, rel)
        l_con = contextual_loss(h0, model.mask_and_reconstruct(h0, mask))
        return total_loss(discriminative_loss(scores, labels), l_con, 1.0)

    def f():
        with tt.no_grad():
            return loss_fn().item()

    tt.zero_grad(model.parameters())
    tt.backward(loss_fn())
    rng = np.random.default_rng(seed)
    groups = {}
    for p in model.parameters():
        groups.setdefault(p.name.split(".")[0], []).append(p)
    worst = 0.0
    for name, params in groups.items():
        flat = [(p, idx) for p in params for idx in np.ndindex(p.shape)]
        for k in rng.choice(len(flat), size=min(per_group, len(flat)), replace=False):
            p, idx = flat[k]
            num = finite_difference(f, p.data, idx)
            err = relative_error(p.grad[idx], num)
            assert err < tol, (p.name, idx, p.grad[idx], num)
            worst = max(worst, err)
    return worst
