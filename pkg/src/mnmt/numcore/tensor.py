"""Dense float64 tensors with a tape for reverse-mode differentiation.

Operations always compute their value.  They are recorded only while a
:class:`Tape` is active and at least one operand requires a gradient, so
inference code runs the very same functions without bookkeeping.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonFiniteGradient, NonFiniteValue, ShapeMismatch

_TAPES: list["Tape"] = []

#: Toggle for the per-op finiteness check.
CHECK_FINITE = True


class Tensor:
    __slots__ = ("data", "requires_grad", "name")
    # make ``ndarray <op> Tensor`` dispatch to the reflected Tensor method
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Records operations in execution order, which is a topological order.

    >>> x = parameter([1.0, 2.0])
    >>> with Tape() as tape:
    ...     loss = sum_(x * x)
    >>> tape.gradient(loss, [x])[0]
    array([2., 4.])
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def record(self, out, inputs, backward):
        self.nodes.append((out, inputs, backward))

    def gradient(self, loss: Tensor, params) -> list[np.ndarray]:
        if loss.data.size != 1:
            raise ShapeMismatch(f"loss must be scalar, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for inp, gi in zip(inputs, backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        result = []
        for p in params:
            g = grads.get(id(p))
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.isfinite(g).all():
                raise NonFiniteGradient(f"non-finite gradient for {p.name or 'tensor'}")
            result.append(g)
        return result


def backward(tape: Tape, loss: Tensor, params) -> list[np.ndarray]:
    """Gradients of scalar ``loss`` for each of ``params``."""
    return tape.gradient(loss, params)


def _emit(value, inputs, backward_fn) -> Tensor:
    if CHECK_FINITE and not np.isfinite(value).all():
        raise NonFiniteValue("operation produced NaN or Inf")
    out = Tensor.__new__(Tensor)
    out.data = value
    out.name = None
    out.requires_grad = False
    if _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1].record(out, inputs, backward_fn)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _emit(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _emit(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _emit(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., n) and ``b`` of shape (n, m) or (n,)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    value = a.data @ b.data

    def bw(g):
        if b.ndim == 1:
            ga = g[..., None] * b.data
            gb = a.data.reshape(-1, b.shape[0]).T @ g.reshape(-1)
        else:
            ga = g @ b.data.T
            gb = a.data.reshape(-1, b.shape[0]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _emit(value, (a, b), bw)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _emit(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _emit(y, (x,), lambda g: (g * y * (1.0 - y),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return _emit(y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(x.data)
    return _emit(y, (x,), lambda g: (g / x.data,))


def _masked_shift(x, mask):
    z = x if mask is None else np.where(mask > 0, x, -np.inf)
    return z - z.max(axis=-1, keepdims=True)


def softmax(x, mask=None) -> Tensor:
    """Softmax over the last axis; entries with ``mask == 0`` get probability 0."""
    x = as_tensor(x)
    e = np.exp(_masked_shift(x.data, mask))
    p = e / e.sum(axis=-1, keepdims=True)
    return _emit(p, (x,), lambda g: (p * (g - (g * p).sum(axis=-1, keepdims=True)),))


def log_softmax(x) -> Tensor:
    x = as_tensor(x)
    z = _masked_shift(x.data, None)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)
    return _emit(y, (x,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def softmax_cross_entropy(logits, targets, weights=None, mask=None) -> Tensor:
    """Sum over rows of ``-weight * log softmax(logits)[target]``.

    ``targets`` indexes the last axis of ``logits``.  Rows with weight 0
    contribute neither loss nor gradient.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeMismatch(f"cross entropy: logits {logits.shape} vs targets {targets.shape}")
    w = np.ones(targets.shape) if weights is None else np.asarray(weights, dtype=np.float64)
    z = _masked_shift(logits.data, mask)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    # skipped rows may point at masked entries (-inf); zero them before weighting
    picked = np.where(w > 0, picked, 0.0)
    value = np.asarray(-(w * picked).sum())

    def bw(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        return (g * (p - onehot) * w[..., None],)

    return _emit(value, (logits,), bw)


def maxout(x, pool=2) -> Tensor:
    """Max over consecutive groups of ``pool`` features: [1,3,2,0] -> [3,2]."""
    x = as_tensor(x)
    n = x.shape[-1]
    if n % pool:
        raise ShapeMismatch(f"maxout: feature size {n} not divisible by {pool}")
    grouped = x.data.reshape(x.shape[:-1] + (n // pool, pool))
    arg = grouped.argmax(axis=-1)
    y = np.take_along_axis(grouped, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gx = np.zeros_like(grouped)
        np.put_along_axis(gx, arg[..., None], g[..., None], axis=-1)
        return (gx.reshape(x.shape),)

    return _emit(y, (x,), bw)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeMismatch(f"concat: {err}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _emit(value, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        value = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeMismatch(f"stack: {err}") from None

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _emit(value, tuple(tensors), bw)


def getitem(x, idx) -> Tensor:
    """Basic (non-fancy) slicing."""
    x = as_tensor(x)

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        return (gx,)

    return _emit(x.data[idx], (x,), bw)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _emit(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def sum_(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    value = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit(value, (x,), bw)


def embedding(table, ids) -> Tensor:
    """Row lookup ``table[ids]`` for an integer array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (gt,)

    return _emit(table.data[ids], (table,), bw)
