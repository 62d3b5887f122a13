"""Dense float64 tensors with reverse-mode automatic differentiation.

Every value in the network (features, weights, attention maps, losses) is a
``Tensor`` wrapping a ``numpy`` float64 array.  Operations record an eager
define-by-run graph: each result keeps references to the parents it needs
gradients for, plus a closure implementing its backward rule.  Calling
``backward()`` on a scalar runs the closures in reverse topological order and
accumulates gradients additively into every ``requires_grad`` leaf; the graph
is freed afterwards so repeated forward passes do not leak memory.

Gradients flow only where they are needed: constants (labels, position
encodings) never receive a ``grad`` buffer, and inside a ``no_grad()`` block
no graph is recorded at all.
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "check_finite",
    "add",
    "mul",
    "matmul",
    "concat",
    "tanh",
    "sigmoid",
    "relu",
    "exp",
    "log",
    "sqrt",
    "clip",
    "softmax",
    "embedding_rows",
    "broadcast_rows",
    "repeat_rows",
    "take_pairs",
    "cosine_rows",
    "smooth_l1",
    "bce_loss",
    "zeros",
    "ones",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


_GRAD_ENABLED = True
_CHECK_FINITE = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def check_finite():
    """Raise ``FloatingPointError`` if any op inside the block produces NaN/Inf."""
    global _CHECK_FINITE
    prev = _CHECK_FINITE
    _CHECK_FINITE = True
    try:
        yield
    finally:
        _CHECK_FINITE = prev


def _verify_finite(data):
    if _CHECK_FINITE and not np.all(np.isfinite(data)):
        raise FloatingPointError("tensor contains NaN or Inf values")


class Tensor:
    """A float64 array plus an optional slot in the differentiation graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        _verify_finite(self.data)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- graph bookkeeping --------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        """Internal constructor for op results; records the graph if needed."""
        out = Tensor.__new__(Tensor)
        out.data = data
        _verify_finite(data)
        out.grad = None
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(p for p in parents if p.requires_grad)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def _toposort(self):
        order = []
        seen = set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        return order  # inputs first

    def backward(self, free_graph: bool = True):
        """Backpropagate from this scalar; accumulates into leaf ``grad``s."""
        if self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that requires no gradient")
        order = self._toposort()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
        if free_graph:
            for node in order:
                if node._backward is not None:  # internal node
                    node._parents = ()
                    node._backward = None
                    node.grad = None

    # -- basic views --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def __len__(self):
        return len(self.data)

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- creation ---------------------------------------------------------------


def zeros(*shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(*shape, requires_grad=False):
    return Tensor(np.ones(shape), requires_grad=requires_grad)


# -- arithmetic -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor._make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeError(f"cannot divide shapes {a.shape} and {b.shape}") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return Tensor._make(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor._make(data, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {x.shape}")
    data = x.data.T.copy()

    def backward(g):
        x._accumulate(g.T)

    return Tensor._make(data, (x,), backward)


def reshape(x: Tensor, *shape) -> Tensor:
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    old = x.data.shape
    data = x.data.reshape(shape)

    def backward(g):
        x._accumulate(g.reshape(old))

    return Tensor._make(data, (x,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"cannot concatenate shapes {shapes} along axis {axis}") from None
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._make(data, tuple(tensors), backward)


def getitem(x: Tensor, index) -> Tensor:
    data = np.array(x.data[index])

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)  # duplicates in fancy indices must accumulate
        x._accumulate(full)

    return Tensor._make(data, (x,), backward)


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    return Tensor._make(np.asarray(data), (x,), backward)


def tensor_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        count = x.data.shape[axis]
    return mul(tensor_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- elementwise nonlinearities --------------------------------------------


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    data = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - data * data))

    return Tensor._make(data, (x,), backward)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    # split by sign for numerical stability at large |x|
    data = np.where(
        x.data >= 0,
        1.0 / (1.0 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
    )

    def backward(g):
        x._accumulate(g * data * (1.0 - data))

    return Tensor._make(data, (x,), backward)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def backward(g):
        x._accumulate(g * (x.data > 0))

    return Tensor._make(data, (x,), backward)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    data = np.exp(x.data)

    def backward(g):
        x._accumulate(g * data)

    return Tensor._make(data, (x,), backward)


def log(x) -> Tensor:
    x = _as_tensor(x)
    data = np.log(x.data)

    def backward(g):
        x._accumulate(g / x.data)

    return Tensor._make(data, (x,), backward)


def sqrt(x) -> Tensor:
    x = _as_tensor(x)
    data = np.sqrt(x.data)

    def backward(g):
        x._accumulate(g * 0.5 / data)

    return Tensor._make(data, (x,), backward)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient is zero where the clamp engaged."""
    x = _as_tensor(x)
    data = np.clip(x.data, lo, hi)
    inside = (x.data >= lo) & (x.data <= hi)

    def backward(g):
        x._accumulate(g * inside)

    return Tensor._make(data, (x,), backward)


def smooth_l1(x) -> Tensor:
    """Per-element smooth L1: 0.5*x^2 for |x|<1, |x|-0.5 otherwise."""
    x = _as_tensor(x)
    a = np.abs(x.data)
    quad = a < 1.0
    data = np.where(quad, 0.5 * x.data * x.data, a - 0.5)

    def backward(g):
        x._accumulate(g * np.where(quad, x.data, np.sign(x.data)))

    return Tensor._make(data, (x,), backward)


# -- reductions with structure ---------------------------------------------


def softmax(x, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max subtraction)."""
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        x._accumulate((g - dot) * data)

    return Tensor._make(data, (x,), backward)


# -- gather / scatter shapes ------------------------------------------------


def embedding_rows(table: Tensor, ids) -> Tensor:
    """Select rows ``ids`` from ``table``; gradients land on those rows only."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"embedding ids must be 1-D, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(
            f"embedding id out of range: ids span [{ids.min()}, {ids.max()}], "
            f"table has {table.shape[0]} rows"
        )
    data = table.data[ids].copy()

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        table._accumulate(full)

    return Tensor._make(data, (table,), backward)


def broadcast_rows(v: Tensor, n: int) -> Tensor:
    """Tile a vector [D] into a matrix [n, D]."""
    v = _as_tensor(v)
    if v.ndim != 1:
        raise ShapeError(f"broadcast_rows expects a vector, got shape {v.shape}")
    data = np.broadcast_to(v.data, (n, v.shape[0])).copy()

    def backward(g):
        v._accumulate(g.sum(axis=0))

    return Tensor._make(data, (v,), backward)


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Repeat each row of [T, D] k consecutive times, giving [T*k, D]."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"repeat_rows expects a matrix, got shape {x.shape}")
    t, d = x.shape
    data = np.repeat(x.data, k, axis=0)

    def backward(g):
        x._accumulate(g.reshape(t, k, d).sum(axis=1))

    return Tensor._make(data, (x,), backward)


def take_pairs(x: Tensor, rows, cols) -> Tensor:
    """Gather scalars x[rows[i], cols[i]] into a vector; scatter-add backward."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.shape != cols.shape or rows.ndim != 1:
        raise ShapeError(f"row/col index shapes differ: {rows.shape} vs {cols.shape}")
    data = x.data[rows, cols].copy()

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (rows, cols), g)
        x._accumulate(full)

    return Tensor._make(data, (x,), backward)


# -- similarity and losses --------------------------------------------------

_NORM_FLOOR = 1e-12


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity of each row of [n, D] against a vector [D].

    Rows (or ``b``) with vanishing norm get similarity 0 and no gradient,
    instead of NaN.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 1 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cosine_rows shape mismatch: {a.shape} vs {b.shape}")
    an = np.linalg.norm(a.data, axis=1)
    bn = np.linalg.norm(b.data)
    denom = an * bn
    ok = denom > _NORM_FLOOR
    safe = np.where(ok, denom, 1.0)
    dots = a.data @ b.data
    data = np.where(ok, dots / safe, 0.0)

    def backward(g):
        gm = g * ok
        if a.requires_grad:
            # d c_i / d a_i = b/(|a_i||b|) - c_i * a_i/|a_i|^2
            safe_an = np.where(an > 0, an, 1.0)
            ga = (gm / safe)[:, None] * b.data[None, :] - (
                (gm * data) / (safe_an * safe_an)
            )[:, None] * a.data
            a._accumulate(ga)
        if b.requires_grad:
            safe_bn = bn if bn > 0 else 1.0
            gb = (gm / safe) @ a.data - ((gm * data).sum() / (safe_bn * safe_bn)) * b.data
            b._accumulate(gb)

    return Tensor._make(data, (a, b), backward)


_BCE_EPS = 1e-7


def bce_loss(o, o_gt) -> Tensor:
    """Mean binary cross-entropy with soft labels; predictions clamped to
    [1e-7, 1-1e-7] before the logs so the loss is always finite."""
    o, o_gt = _as_tensor(o), _as_tensor(o_gt)
    if o.shape != o_gt.shape:
        raise ShapeError(f"prediction/label shape mismatch: {o.shape} vs {o_gt.shape}")
    if o_gt.data.size and (o_gt.data.min() < 0.0 or o_gt.data.max() > 1.0):
        raise ValueError("bce_loss labels must lie in [0, 1]")
    oc = clip(o, _BCE_EPS, 1.0 - _BCE_EPS)
    term = mul(o_gt, log(oc)) + mul(1.0 - o_gt, log(1.0 - oc))
    return mul(tensor_mean(term), -1.0)
