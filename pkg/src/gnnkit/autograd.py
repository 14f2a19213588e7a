"""A small reverse-mode gradient engine over float64 numpy arrays.

Every op returns a new :class:`Tensor`. When any input requires gradients the
result carries a :class:`TapeNode` holding its inputs and a backward rule;
:func:`backward` walks those nodes in reverse topological order.

Broadcasting is deliberately narrow: :func:`add` accepts a row-vector bias
against a matrix, every other binary op needs identical shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import SparseMatrix

LOG_FLOOR = 1e-12


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass
class TapeNode:
    op: str
    inputs: tuple
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
    saved: dict = field(default_factory=dict)


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[TapeNode] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" op={self.node.op}" if self.node else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        if np.isscalar(other):
            return shift(self, float(other))
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return shift(self, -float(other))
        return add(self, scale(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return shift(scale(self, -1.0), float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return elementwise_mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def record(out_data, op: str, inputs: Sequence[Tensor], backward, **saved) -> Tensor:
    out = Tensor(out_data)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op, tuple(inputs), backward, saved)
    return out


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp into ``[lo, hi]``; the gradient is zero where clamping is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return record(np.clip(a.data, lo, hi), "clip", (a,), lambda g: (g * inside,))


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def back(g):
        return g @ b.data.T, a.data.T @ g

    return record(a.data @ b.data, "matmul", (a, b), back)


def sparse_dense_matmul(s: SparseMatrix, x) -> Tensor:
    """``S @ X`` with a constant sparse left factor."""
    x = as_tensor(x)
    if x.data.ndim != 2 or s.shape[1] != x.shape[0]:
        raise ShapeError(f"sparse_dense_matmul: cannot multiply {s.shape} by {x.shape}")

    def back(g):
        return (s.T.matmul(g),)

    return record(s.matmul(x.data), "sparse_dense_matmul", (x,), back)


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may be a row vector broadcast over the rows of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return record(a.data + b.data, "add", (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.size == a.shape[1] and b.data.ndim in (1, 2) \
            and (b.data.ndim == 1 or b.shape[0] == 1):
        bshape = b.shape
        return record(a.data + b.data.reshape(1, -1), "add", (a, b),
                      lambda g: (g, g.sum(axis=0).reshape(bshape)))
    raise ShapeError(f"add: shapes {a.shape} and {b.shape} are incompatible")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return record(a.data * c, "scale", (a,), lambda g: (g * c,))


def shift(a, c: float) -> Tensor:
    a = as_tensor(a)
    return record(a.data + c, "shift", (a,), lambda g: (g,))


def elementwise_mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("elementwise_mul", a, b)
    return record(a.data * b.data, "elementwise_mul", (a, b),
                  lambda g: (g * b.data, g * a.data))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return record(a.data.T.copy(), "transpose", (a,), lambda g: (g.T,))


def _matrix(op: str, a: Tensor):
    if a.data.ndim != 2:
        raise ShapeError(f"{op}: expected a matrix, got shape {a.shape}")


def row_sum(a) -> Tensor:
    a = as_tensor(a)
    _matrix("row_sum", a)
    d = a.shape[1]
    return record(a.data.sum(axis=1), "row_sum", (a,),
                  lambda g: (np.repeat(g[:, None], d, axis=1),))


def row_mean(a) -> Tensor:
    a = as_tensor(a)
    _matrix("row_mean", a)
    d = a.shape[1]
    return record(a.data.mean(axis=1), "row_mean", (a,),
                  lambda g: (np.repeat(g[:, None] / d, d, axis=1),))


def row_max(a) -> Tensor:
    """Maximum of each row; the gradient goes to the first maximal entry."""
    a = as_tensor(a)
    _matrix("row_max", a)
    arg = np.argmax(a.data, axis=1)
    rows = np.arange(a.shape[0])

    def back(g):
        out = np.zeros_like(a.data)
        out[rows, arg] = g
        return (out,)

    return record(a.data[rows, arg], "row_max", (a,), back, argmax=arg)


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return record(np.array(a.data.sum()), "sum_all", (a,), lambda g: (np.full(shape, float(g)),))


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    shape, n = a.shape, max(a.data.size, 1)
    return record(np.array(a.data.mean()), "mean_all", (a,),
                  lambda g: (np.full(shape, float(g) / n),))


def concat_cols(parts: Sequence) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    for p in parts:
        _matrix("concat_cols", p)
    if len({p.shape[0] for p in parts}) != 1:
        raise ShapeError(f"concat_cols: row counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def back(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return record(np.concatenate([p.data for p in parts], axis=1), "concat_cols", parts, back)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return record(s, "sigmoid", (a,), lambda g: (g * s * (1.0 - s),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return record(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return record(t, "tanh", (a,), lambda g: (g * (1.0 - t * t),))


def log(a) -> Tensor:
    """Natural log with the input clamped below at ``LOG_FLOOR``."""
    a = as_tensor(a)
    if np.any(a.data < 0) or np.any(np.isnan(a.data)):
        raise DomainError("log: negative or NaN input")
    clamped = np.maximum(a.data, LOG_FLOOR)
    live = a.data > LOG_FLOOR
    return record(np.log(clamped), "log", (a,), lambda g: (np.where(live, g / clamped, 0.0),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return record(e, "exp", (a,), lambda g: (g * e,))


def softmax_rows(a) -> Tensor:
    a = as_tensor(a)
    _matrix("softmax_rows", a)
    if not np.all(np.isfinite(a.data)):
        raise DomainError("softmax_rows: non-finite input")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    return record(s, "softmax_rows", (a,),
                  lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),))


def gather_rows(a, index) -> Tensor:
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    n = a.shape[0]

    def back(g):
        out = np.zeros((n,) + g.shape[1:])
        np.add.at(out, index, g)
        return (out,)

    return record(a.data[index], "gather_rows", (a,), back)


def scatter_add_rows(a, index, n: int) -> Tensor:
    """``out[index[k]] += a[k]`` into ``n`` zero-initialized rows."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if len(index) != a.shape[0]:
        raise ShapeError(f"scatter_add_rows: {len(index)} indices for {a.shape[0]} rows")
    out = np.zeros((n,) + a.shape[1:])
    np.add.at(out, index, a.data)
    return record(out, "scatter_add_rows", (a,), lambda g: (g[index],))


def scatter_max_rows(a, index, n: int) -> Tensor:
    """Elementwise maximum over the rows sent to each of ``n`` targets.

    Targets that receive no rows are zero. The gradient of each output entry
    goes to the lowest-numbered source row that attains the maximum.
    """
    a = as_tensor(a)
    _matrix("scatter_max_rows", a)
    index = np.asarray(index, dtype=np.int64)
    if len(index) != a.shape[0]:
        raise ShapeError(f"scatter_max_rows: {len(index)} indices for {a.shape[0]} rows")
    d = a.shape[1]
    out = np.zeros((n, d))
    winners = np.zeros((0, d), dtype=np.int64)
    targets = np.zeros(0, dtype=np.int64)
    if len(index):
        order = np.argsort(index, kind="stable")
        xs, ids = a.data[order], index[order]
        starts = np.nonzero(np.r_[True, ids[1:] != ids[:-1]])[0]
        targets = ids[starts]
        best = np.maximum.reduceat(xs, starts, axis=0)
        seg = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(ids)]))
        pos = np.where(xs == best[seg], np.arange(len(ids))[:, None], len(ids))
        winners = order[np.minimum.reduceat(pos, starts, axis=0)]
        out[targets] = best
    cols = np.broadcast_to(np.arange(d), winners.shape)

    def back(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, (winners.ravel(), cols.ravel()), g[targets].ravel())
        return (grad,)

    return record(out, "scatter_max_rows", (a,), back, argmax=winners)


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in reversed(t.node.inputs):
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d t`` into ``t.grad`` for every tensor on the tape."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for t in reversed(_topological(loss)):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        t.grad = g.copy() if t.grad is None else t.grad + g
        if t.node is None:
            continue
        for parent, pg in zip(t.node.inputs, t.node.backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


@dataclass
class GradCheckReport:
    max_rel_error: float
    analytic: list
    numeric: list
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def finite_diff_check(f: Callable[..., Tensor], x, eps: float = 1e-5, tol: float = 1e-4,
                      floor: float = 1e-6) -> GradCheckReport:
    """Compare backward-pass gradients of scalar ``f(*x)`` with central differences.

    ``x`` is a tensor or a list of tensors. The per-coordinate relative error
    is ``|a - n| / max(|a|, |n|, floor)``; the worst one is reported.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    for t in xs:
        t.requires_grad = True
        t.grad = None
    out = f(*xs)
    if out.data.size != 1:
        raise ShapeError("finite_diff_check needs a scalar-valued function")
    backward(out)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in xs]
    numeric = []
    for t in xs:
        num = np.zeros_like(t.data)
        flat, nflat = t.data.reshape(-1), num.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            hi = float(f(*xs).data)
            flat[k] = orig - eps
            lo = float(f(*xs).data)
            flat[k] = orig
            nflat[k] = (hi - lo) / (2 * eps)
        numeric.append(num)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size:
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    for t in xs:
        t.grad = None
    return GradCheckReport(worst, analytic, numeric, tol)
