"""Define-by-run reverse-mode autodiff over float64 numpy arrays.

Every op returns a fresh :class:`Tensor` whose ``_backward`` closure pushes
the upstream gradient into its parents.  Graphs are rebuilt on each forward
pass; calling :meth:`Tensor.backward` on a scalar walks the graph once in
reverse topological order.
"""

from __future__ import annotations

import numpy as np

from eapred.errors import DimensionError, DomainError, NumericalError

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological(self)
        for node in order:
            if node is not self:
                node.grad = None
        self.grad = np.array(grad, dtype=DTYPE).reshape(self.shape)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen and (p.requires_grad or p._parents):
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_grad(*ts):
    return any(t.requires_grad for t in ts)


def _check_finite(arr, op):
    if not np.isfinite(arr).all():
        raise NumericalError(f"{op} produced a non-finite value")


def _make(data, op, parents, backward):
    _check_finite(data, op)
    if not _needs_grad(*parents):
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _push(t, g):
    if t.requires_grad:
        t._accumulate(g)


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            _push(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            if a.ndim > 2 and b.ndim == 2:
                # fold batch dims instead of materialising a (batch, k, n) stack
                a2 = a.data.reshape(-1, a.shape[-1])
                _push(b, a2.T @ g.reshape(-1, g.shape[-1]))
            else:
                _push(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _make(out, "matmul", (a, b), backward)


def transpose(a, axes=None):
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        _push(a, np.transpose(g, inv))

    return _make(np.transpose(a.data, axes), "transpose", (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        _push(a, g.reshape(a.shape))

    return _make(a.data.reshape(shape), "reshape", (a,), backward)


def getitem(a, idx):
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        if _fancy(idx):
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        _push(a, full)

    return _make(np.array(a.data[idx]), "getitem", (a,), backward)


def _fancy(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=axis)):
            _push(t, part)

    return _make(out, "concat", tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        for i, t in enumerate(tensors):
            _push(t, np.take(g, i, axis=axis))

    return _make(out, "stack", tuple(tensors), backward)


# ---------------------------------------------------------------- pointwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _push(a, _unbroadcast(g, a.shape))
        _push(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, "add", (a, b), backward)


def neg(a):
    a = as_tensor(a)

    def backward(g):
        _push(a, -g)

    return _make(-a.data, "neg", (a,), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _push(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _push(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, "mul", (a, b), backward)


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    # split by sign so neither branch overflows exp
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        _push(a, g * out * (1.0 - out))

    return _make(out, "sigmoid", (a,), backward)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        _push(a, g * (1.0 - out * out))

    return _make(out, "tanh", (a,), backward)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        _push(a, g * mask)

    return _make(a.data * mask, "relu", (a,), backward)


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log of a non-positive value")

    def backward(g):
        _push(a, g / a.data)

    return _make(np.log(a.data), "log", (a,), backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        _push(a, g * out)

    return _make(out, "exp", (a,), backward)


def clamp_min(a, floor):
    """Clip from below; the gradient is blocked wherever the floor is active."""
    a = as_tensor(a)
    keep = a.data >= floor

    def backward(g):
        _push(a, g * keep)

    return _make(np.where(keep, a.data, floor), "clamp_min", (a,), backward)


# ---------------------------------------------------------------- reductions


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _push(a, np.broadcast_to(g, a.shape))

    return _make(np.sum(a.data, axis=axis, keepdims=keepdims), "sum", (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _push(a, np.broadcast_to(g, a.shape) / n)

    return _make(np.mean(a.data, axis=axis, keepdims=keepdims), "mean", (a,), backward)


def pick(a, index):
    """Select ``a[i, index[i]]`` along the last axis of a 2-D tensor."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def backward(g):
        full = np.zeros_like(a.data)
        full[rows, index] = g
        _push(a, full)

    return _make(a.data[rows, index], "pick", (a,), backward)


# ---------------------------------------------------------------- composites with fused rules


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _push(a, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _make(out, "softmax", (a,), backward)


def layer_norm(a, gain, bias, eps=1e-5):
    """Normalise over the last axis then apply an elementwise affine map."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            _push(gain, _unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            _push(bias, _unbroadcast(g, bias.shape))
        if a.requires_grad:
            gx = g * gain.data
            n = a.shape[-1]
            dx = (inv / n) * (
                n * gx - gx.sum(axis=-1, keepdims=True) - xhat * (gx * xhat).sum(axis=-1, keepdims=True)
            )
            _push(a, dx)

    return _make(out, "layer_norm", (a, gain, bias), backward)


def dropout(a, rate, training, rng):
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` at train time."""
    from eapred.errors import ConfigError

    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    a = as_tensor(a)
    if not training or rate == 0.0:
        return a
    mask = (rng.uniform(a.shape) >= rate) / (1.0 - rate)

    def backward(g):
        _push(a, g * mask)

    return _make(a.data * mask, "dropout", (a,), backward)
