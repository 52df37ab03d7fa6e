"""A small define-by-run reverse-mode differentiation engine over numpy arrays.

Every op builds a new :class:`Tensor` that remembers its parents and a closure
mapping the output gradient to one gradient per parent. Tensors are numbered
in creation order, so creation order is a topological order of the graph and
:func:`backward` simply walks the reachable nodes from the newest id down.

Example::

    w = Parameter(np.ones(3))
    loss = (w * w).sum()
    backward(loss)
    w.grad  # array([2., 2., 2.])
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NonScalarLoss, ShapeMismatch

_ids = itertools.count()
_check_finite = False


def set_debug(enabled: bool) -> None:
    """When enabled every op raises FloatingPointError on a non-finite output."""
    global _check_finite
    _check_finite = bool(enabled)


class Tensor:
    __array_priority__ = 1000
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id", "name")

    def __init__(self, data, parents: tuple = (), backward: Callable | None = None,
                 requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.name = name
        self._id = next(_ids)
        live = requires_grad or any(p.requires_grad for p in parents)
        self.requires_grad = live
        self._parents = parents if live else ()
        self._backward = backward if live else None
        if _check_finite:
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite value produced by {name or 'op'}")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return take(self, idx)

    def sum(self, axis=None, keepdims=False): return sum_(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


class Parameter(Tensor):
    """A trainable leaf. ``decay`` marks whether weight decay applies to it."""

    __slots__ = ("decay",)

    def __init__(self, data, name: str | None = None, decay: bool = True):
        super().__init__(np.array(data, copy=True), requires_grad=True, name=name)
        self.decay = decay
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if like is not None and np.isscalar(x):
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ----------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return Tensor(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), name="add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return Tensor(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), name="sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor(ad * bd, (a, b),
                  lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), name="mul")


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, (a,), lambda g: (-g,), name="neg")


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b = as_tensor(b)
    return as_tensor(a, b), b


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype, copy=False)
    return Tensor(s, (a,), lambda g: (g * s * (1 - s),), name="sigmoid")


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return Tensor(t, (a,), lambda g: (g * (1 - t * t),), name="tanh")


def relu(a: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    mask = a.data > 0
    return Tensor(a.data * mask, (a,), lambda g: (g * mask,), name="relu")


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    return Tensor(e, (a,), lambda g: (g * e,), name="exp")


def log(a: Tensor) -> Tensor:
    x = a.data
    return Tensor(np.log(x), (a,), lambda g: (g / x,), name="log")


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor(s, (a,), back, name="softmax")


def log_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    s = np.exp(out)
    return Tensor(out, (a,), lambda g: (g - s * g.sum(axis=-1, keepdims=True),), name="log_softmax")


# ----------------------------------------------------------------------------
# linear algebra and structure


def matmul(a, b) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor(ad @ bd, (a, b), back, name="matmul")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ax = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, tensors[0].shape)) if i != ax
        ):
            raise ShapeMismatch(f"concat: shapes {[t.shape for t in tensors]} differ off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=ax))

    return Tensor(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), back, name="concat")


def take(a: Tensor, idx) -> Tensor:
    """Basic slicing/indexing; gradient scatters back into the source shape."""
    shape, dtype = a.shape, a.dtype

    def back(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, idx, g) if _is_advanced(idx) else full.__setitem__(idx, g)
        return (full,)

    return Tensor(a.data[idx], (a,), back, name="slice")


def _is_advanced(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return Tensor(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),), name="reshape")


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    src = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,), back, name="sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    s = sum_(a, axis, keepdims)
    return mul(s, 1.0 / float(n))


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity in eval mode or when ``p == 0``."""
    if not train or p <= 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    rng = rng if rng is not None else np.random.default_rng()
    keep = rng.random(a.shape) >= p
    mask = (keep / (1.0 - p)).astype(a.dtype)
    return Tensor(a.data * mask, (a,), lambda g: (g * mask,), name="dropout")


# ----------------------------------------------------------------------------
# losses as fused primitives (stable forms, cheap backward)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[target]``."""
    z = logits.data
    t = np.asarray(targets, dtype=np.intp)
    if z.ndim != 2 or t.shape != (z.shape[0],):
        raise ShapeMismatch(f"cross_entropy: logits {z.shape} vs targets {t.shape}")
    n = z.shape[0]
    shifted = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(n)
    loss = (lse - shifted[rows, t]).mean()

    def back(g):
        p = np.exp(shifted - lse[:, None])
        p[rows, t] -= 1.0
        return ((g / n) * p,)

    return Tensor(np.asarray(loss, dtype=z.dtype), (logits,), back, name="cross_entropy")


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean over all elements of the binary cross-entropy of ``sigmoid(logits)``."""
    z = logits.data
    y = np.asarray(targets, dtype=z.dtype)
    if y.shape != z.shape:
        raise ShapeMismatch(f"bce_with_logits: logits {z.shape} vs targets {y.shape}")
    loss = (np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))).mean()
    n = z.size

    def back(g):
        e = np.exp(-np.abs(z))
        s = np.where(z >= 0, 1 / (1 + e), e / (1 + e))
        return ((g / n) * (s - y),)

    return Tensor(np.asarray(loss, dtype=z.dtype), (logits,), back, name="bce")


# ----------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable trainable leaf."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    nodes = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in nodes:
            continue
        nodes[t._id] = t
        stack.extend(p for p in t._parents if p.requires_grad)
    grads = {loss._id: np.ones_like(loss.data)}
    for nid in sorted(nodes, reverse=True):
        t = nodes[nid]
        g = grads.pop(nid, None)
        if g is None:
            continue
        if not t._parents:
            t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        for p, pg in zip(t._parents, t._backward(g)):
            if not p.requires_grad:
                continue
            if pg.dtype != p.data.dtype:
                pg = pg.astype(p.data.dtype)
            prev = grads.get(p._id)
            grads[p._id] = pg if prev is None else prev + pg


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def grad_check(f: Callable[[], Tensor], params: Sequence[Parameter], h: float = 1e-5,
               exclude: dict | None = None) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    The error for one entry is ``|a - n| / max(|a|, |n|, 1e-8)``. ``exclude`` maps
    a parameter to a boolean mask of entries to skip (e.g. inputs sitting on a
    kink). Run in float64.
    """
    zero_grad(params)
    backward(f())
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        skip = None if exclude is None else exclude.get(id(p))
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            if skip is not None and skip.reshape(-1)[i]:
                continue
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            a = float(analytic.reshape(-1)[i])
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), 1e-8))
    return worst
