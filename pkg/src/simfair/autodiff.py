"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is recorded eagerly: every operation that touches a tensor with
``requires_grad`` stores its parents and a backward rule on the result.
``backward`` linearizes the recording topologically and replays it in
reverse, accumulating gradients into ``.grad`` buffers until they are
explicitly zeroed.  Everything is float64; there is no device or dtype
story on purpose.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an operation."""


class GradientError(RuntimeError):
    """Raised when a gradient is required but missing."""


_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A numpy-backed float64 array that can participate in the tape."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_bwd")

    # make ndarray <op> Tensor defer to the Tensor reflected operators
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple = ()
        self._bwd = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def __repr__(self):
        flags = []
        if self.requires_grad:
            flags.append("requires_grad")
        if self.name:
            flags.append(f"name={self.name!r}")
        suffix = (", " + ", ".join(flags)) if flags else ""
        return f"Tensor(shape={self.shape}{suffix})"

    # -- gradient bookkeeping -------------------------------------------

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self):
        backward(self)

    # -- operator sugar ---------------------------------------------------

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return powc(self, p)

    def exp(self):
        return exp(self)

    def abs(self):
        return absval(self)

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def reshape(self, shape):
        return reshape(self, shape)


def _scalar_err(t):
    raise ValueError(f"item() expects a scalar tensor, got shape {t.shape}")


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data: np.ndarray, parents: tuple, bwd) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._bwd = bwd
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    g = _unbroadcast(np.asarray(g, dtype=np.float64), t.data.shape)
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _binary_data(op: str, a: Tensor, b: Tensor, fn):
    try:
        return fn(a.data, b.data)
    except ValueError as err:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not conform") from err


# -- elementwise binary ops ------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = _binary_data("add", a, b, np.add)

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return _record(data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = _binary_data("sub", a, b, np.subtract)

    def bwd(g):
        _accum(a, g)
        _accum(b, -g)

    return _record(data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = _binary_data("mul", a, b, np.multiply)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * b.data)
        if b.requires_grad:
            _accum(b, g * a.data)

    return _record(data, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = _binary_data("div", a, b, np.divide)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g / b.data)
        if b.requires_grad:
            _accum(b, -g * a.data / (b.data * b.data))

    return _record(data, (a, b), bwd)


def neg(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, -g)

    return _record(-a.data, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} and {b.shape}")
    data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _record(data, (a, b), bwd)


# -- elementwise unary ops -------------------------------------------------

def exp(a) -> Tensor:
    a = _wrap(a)
    data = np.exp(a.data)

    def bwd(g):
        _accum(a, g * data)

    return _record(data, (a,), bwd)


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0.0

    def bwd(g):
        _accum(a, g * mask)

    return _record(np.maximum(a.data, 0.0), (a,), bwd)


max0 = relu


def min0(a) -> Tensor:
    a = _wrap(a)
    mask = a.data < 0.0

    def bwd(g):
        _accum(a, g * mask)

    return _record(np.minimum(a.data, 0.0), (a,), bwd)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    # split by sign to avoid exp overflow on large negatives
    data = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        _accum(a, g * data * (1.0 - data))

    return _record(data, (a,), bwd)


def tanh(a) -> Tensor:
    a = _wrap(a)
    data = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1.0 - data * data))

    return _record(data, (a,), bwd)


def absval(a) -> Tensor:
    a = _wrap(a)
    sign = np.sign(a.data)

    def bwd(g):
        _accum(a, g * sign)

    return _record(np.abs(a.data), (a,), bwd)


def powc(a, p) -> Tensor:
    """Elementwise power with a constant scalar exponent."""
    a = _wrap(a)
    p = float(p)
    data = a.data ** p

    def bwd(g):
        _accum(a, g * p * a.data ** (p - 1.0))

    return _record(data, (a,), bwd)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only strictly inside the interval."""
    a = _wrap(a)
    mask = (a.data > lo) & (a.data < hi)

    def bwd(g):
        _accum(a, g * mask)

    return _record(np.clip(a.data, lo, hi), (a,), bwd)


# -- reductions and reshaping ----------------------------------------------

def tsum(a, axis=None) -> Tensor:
    a = _wrap(a)
    data = a.data.sum(axis=axis)

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return _record(data, (a,), bwd)


def tmean(a, axis=None) -> Tensor:
    a = _wrap(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    data = a.data.mean(axis=axis)

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / count, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g / count, axis), a.data.shape))

    return _record(data, (a,), bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _record(data, tuple(tensors), bwd)


def split(a, sections: int, axis: int = -1) -> list[Tensor]:
    """Split into equal sections along an axis (size must divide evenly)."""
    a = _wrap(a)
    if a.data.shape[axis] % sections != 0:
        raise ShapeError(
            f"split: axis {axis} of shape {a.shape} is not divisible into {sections} sections")
    pieces = np.split(a.data, sections, axis=axis)
    width = a.data.shape[axis] // sections
    outs = []
    for i, piece in enumerate(pieces):
        def bwd(g, i=i):
            full = np.zeros_like(a.data)
            sl = [slice(None)] * full.ndim
            sl[axis] = slice(i * width, (i + 1) * width)
            full[tuple(sl)] = g
            _accum(a, full)

        outs.append(_record(piece, (a,), bwd))
    return outs


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    data = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _record(data, (a,), bwd)


# -- backward pass -----------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS (graphs can be deep for recurrent models)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
    return order


def backward(loss: Tensor):
    """Populate ``.grad`` on every requires_grad ancestor of a scalar loss."""
    if loss.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("backward: loss does not require grad (no recorded ancestors)")
    order = _topo_order(loss)
    _accum(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


def zero_grads(params):
    for p in params:
        p.grad = None


# -- Adam with continuous exponential learning-rate decay ---------------------

class AdamState:
    """Optimizer state: per-parameter moments plus a scheduled step counter.

    The effective rate decays continuously: lr(step) = lr0 * rate^(step/decay_steps).
    """

    def __init__(self, lr0: float = 1e-2, decay_steps: int = 150,
                 decay_rate: float = 0.96, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr0 = float(lr0)
        self.decay_steps = int(decay_steps)
        self.decay_rate = float(decay_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def lr_at(self, step: int | None = None) -> float:
        s = self.step if step is None else int(step)
        return self.lr0 * self.decay_rate ** (s / self.decay_steps)


def adam_step(params: list[Tensor], state: AdamState):
    """One bias-corrected Adam update; increments the step and zeroes grads."""
    lr = state.lr_at()
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for i, p in enumerate(params):
        if p.grad is None:
            label = p.name if p.name else f"#{i}"
            raise GradientError(f"adam_step: parameter {label} has no gradient")
        g = p.grad
        m = state._m.get(id(p))
        if m is None:
            m = state._m[id(p)] = np.zeros_like(p.data)
            state._v[id(p)] = np.zeros_like(p.data)
        v = state._v[id(p)]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None
    state.step = t
