"""Small reverse-mode autodiff engine over float64 numpy arrays.

Each operation returns a new :class:`Tensor` that remembers its parents and
a closure propagating the output gradient back to them. :func:`backward`
walks that graph in reverse topological order, accumulates ``.grad`` on every
tensor that requires it, then drops the graph so intermediates can be freed.

Broadcasting follows numpy; gradients flowing into a broadcast operand are
summed back to its shape.
"""

import contextlib
import re
from pathlib import Path

import numpy as np
from scipy.special import expit

CHECKPOINT_HEADER = "STCKPT v1"

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (evaluation passes)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


class Parameter(Tensor):
    """Learnable tensor with Adam state."""

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.first_moment = np.zeros_like(self.data)
        self.second_moment = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accumulate(t, g):
    if not t.requires_grad:
        return
    # never in place: ``g`` may be shared with other operands or be a view
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# --- elementwise ----------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def scale_add(a, alpha, b=None, beta=1.0):
    """``alpha * a + beta * b`` (``b`` optional)."""
    out = mul(a, float(alpha))
    return out if b is None else add(out, mul(b, float(beta)))


def relu(a):
    a = as_tensor(a)
    y = np.maximum(a.data, 0.0)

    def backward(g):
        _accumulate(a, g * (y > 0))

    return _result(y, (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    y = expit(a.data)

    def backward(g):
        _accumulate(a, g * y * (1.0 - y))

    return _result(y, (a,), backward)


def log(a, floor=1e-12):
    """Natural log of ``max(a, floor)``; zero gradient where the floor applies."""
    a = as_tensor(a)
    clipped = np.maximum(a.data, floor)

    def backward(g):
        _accumulate(a, np.where(a.data > floor, g / clipped, 0.0))

    return _result(np.log(clipped), (a,), backward)


def clamp(a, lo, hi):
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        _accumulate(a, g * inside)

    return _result(np.clip(a.data, lo, hi), (a,), backward)


# --- linear algebra / shape -----------------------------------------------------

def matmul(a, b):
    """Batched matrix product over the last two axes (numpy semantics)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >= 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    if b.ndim == 2:
        # (..., m, k) @ (k, n): one flat GEMM instead of a batch of small ones
        a2 = a.data.reshape(-1, a.shape[-1])

        def backward(g):
            g2 = g.reshape(-1, g.shape[-1])
            if a.requires_grad:
                _accumulate(a, (g2 @ b.data.T).reshape(a.shape))
            if b.requires_grad:
                _accumulate(b, a2.T @ g2)

        return _result((a2 @ b.data).reshape(*a.shape[:-1], b.shape[-1]), (a, b), backward)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(a.data @ b.data, (a, b), backward)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, g.reshape(a.shape))

    return _result(a.data.reshape(shape), (a,), backward)


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, np.swapaxes(g, ax1, ax2))

    return _result(np.swapaxes(a.data, ax1, ax2), (a,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, cuts, axis=axis)):
            _accumulate(t, piece)

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def concat_last(a, b):
    return concat([a, b], axis=-1)


# --- reductions -----------------------------------------------------------------

def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum(a, axis, keepdims), 1.0 / n)


def mean_rows(a):
    """Mean over the second-to-last axis: ``(..., K, d) -> (..., d)``."""
    return mean(a, axis=-2)


# --- normalisation ----------------------------------------------------------------

def softmax_rows(a):
    """Softmax over the last axis, stabilised by subtracting the row max."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _accumulate(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _result(y, (a,), backward)


def layer_norm(a, gain, bias, eps=1e-5):
    """Normalise the last axis to zero mean / unit variance, then ``* gain + bias``."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    inv_std = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv_std
    n = a.shape[-1]

    def backward(g):
        if a.requires_grad:
            gx = g * gain.data
            _accumulate(a, inv_std / n * (n * gx - gx.sum(axis=-1, keepdims=True)
                                          - xhat * (gx * xhat).sum(axis=-1, keepdims=True)))
        if gain.requires_grad:
            _accumulate(gain, _unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            _accumulate(bias, _unbroadcast(g, bias.shape))

    return _result(xhat * gain.data + bias.data, (a, gain, bias), backward)


# --- reverse pass -----------------------------------------------------------------

def backward(loss):
    """Populate ``.grad`` of everything ``loss`` depends on, then clear the graph."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
            # interior node: release graph and gradient buffer
            node._backward = None
            node._parents = ()
            node.grad = None


# --- optimiser --------------------------------------------------------------------

def adam_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update of every parameter; zeroes gradients after."""
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.step += 1
        p.first_moment = beta1 * p.first_moment + (1 - beta1) * g
        p.second_moment = beta2 * p.second_moment + (1 - beta2) * g * g
        m_hat = p.first_moment / (1 - beta1 ** p.step)
        v_hat = p.second_moment / (1 - beta2 ** p.step)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad = None


def zero_grad(params):
    for p in params:
        p.grad = None


# --- checkpoints ------------------------------------------------------------------
#
#   STCKPT v1
#   # key = value          (optional comment lines, e.g. the run config)
#   <name> <d1>x<d2>...  <v1> <v2> ...
#
# One record per parameter, values row-major as shortest round-trip decimals.
# A zero-dimensional shape is written as "scalar".

def format_checkpoint(arrays, comments=()):
    lines = [CHECKPOINT_HEADER]
    lines += [f"# {c}" for c in comments]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        if re.search(r"\s", name):
            raise ValueError(f"parameter name {name!r} contains whitespace")
        dims = "x".join(str(d) for d in arr.shape) or "scalar"
        values = " ".join(repr(float(x)) for x in arr.ravel())
        lines.append(f"{name} {dims} {values}")
    return "\n".join(lines) + "\n"


def save_checkpoint(path, arrays, comments=()):
    """Write ``{name: array}`` (or ``{name: Parameter}``) to ``path``."""
    arrays = {k: (v.data if isinstance(v, Tensor) else v) for k, v in arrays.items()}
    Path(path).write_text(format_checkpoint(arrays, comments))


def parse_checkpoint(text):
    """Return ``(arrays, comments)`` from checkpoint text."""
    lines = text.splitlines()
    body = [ln.strip() for ln in lines if ln.strip()]
    if not body or body[0].split() != CHECKPOINT_HEADER.split():
        raise ValueError("not an STCKPT v1 checkpoint")
    arrays, comments = {}, []
    for ln in body[1:]:
        if ln.startswith("#"):
            comments.append(ln[1:].strip())
            continue
        fields = ln.split()
        if len(fields) < 2:
            raise ValueError(f"malformed checkpoint record: {ln[:60]!r}")
        name, dims, values = fields[0], fields[1], fields[2:]
        shape = () if dims == "scalar" else tuple(int(d) for d in dims.split("x"))
        if len(values) != int(np.prod(shape)):
            raise ValueError(f"{name}: expected {int(np.prod(shape))} values, got {len(values)}")
        if name in arrays:
            raise ValueError(f"duplicate parameter {name!r}")
        arrays[name] = np.array([float(v) for v in values], dtype=np.float64).reshape(shape)
    return arrays, comments


def load_checkpoint(path):
    return parse_checkpoint(Path(path).read_text())
