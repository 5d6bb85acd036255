"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Every operation records its parents and a vector-Jacobian product closure;
``backward()`` topologically sorts the recorded graph and accumulates
gradients into the leaves.  All arithmetic is 64-bit and single-threaded
apart from whatever BLAS numpy links against, so results are reproducible
for a fixed seed and thread configuration.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import GraphError, ShapeError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # sum away leading axes numpy prepended
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # sum axes that were broadcast from size 1
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Node in the autodiff graph wrapping a float64 ndarray."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    # -- introspection --------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # -- graph construction ---------------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _node(data, parents, vjp) -> "Tensor":
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            return Tensor(data, requires_grad=True, _parents=parents, _vjp=vjp)
        return Tensor(data)

    def backward(self, seed: np.ndarray | None = None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``.

        Raises GraphError if the recorded graph contains a cycle.
        """
        if seed is None:
            seed = np.ones_like(self.data)
        # iterative post-order with cycle detection
        order = []
        state: dict[int, int] = {}  # 0 = on stack, 1 = done
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            nid = id(node)
            if expanded:
                state[nid] = 1
                order.append(node)
                continue
            st = state.get(nid)
            if st == 1:
                continue
            if st == 0:
                raise GraphError("cycle detected in computation graph")
            state[nid] = 0
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and state.get(id(p)) != 1:
                    if state.get(id(p)) == 0:
                        raise GraphError("cycle detected in computation graph")
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                # leaf: accumulate into .grad
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        a, b = self, other
        return self._node(
            a.data + b.data, (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        a, b = self, other
        return self._node(
            a.data - b.data, (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self, other
        return self._node(
            a.data * b.data, (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape),
                       _unbroadcast(g * a.data, b.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        a, b = self, other
        return self._node(
            a.data / b.data, (a, b),
            lambda g: (_unbroadcast(g / b.data, a.shape),
                       _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        a = self
        return self._node(-a.data, (a,), lambda g: (-g,))

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")
        a, p = self, float(exponent)
        return self._node(
            a.data ** p, (a,),
            lambda g: (g * p * a.data ** (p - 1.0),))

    # -- elementwise functions -------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)
        return self._node(out_data, (a,), lambda g: (g * out_data,))

    def log(self):
        a = self
        return self._node(np.log(a.data), (a,), lambda g: (g / a.data,))

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)
        return self._node(out_data, (a,), lambda g: (g / (2.0 * out_data),))

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)
        return self._node(out_data, (a,), lambda g: (g * (1.0 - out_data * out_data),))

    def sigmoid(self):
        a = self
        # tanh form is stable for large |x|
        out_data = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
        return self._node(out_data, (a,), lambda g: (g * out_data * (1.0 - out_data),))

    def relu(self):
        a = self
        keep = a.data > 0
        return self._node(np.where(keep, a.data, 0.0), (a,), lambda g: (g * keep,))

    # -- reductions -------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, a.shape).copy(),)
            gg = g
            if not keepdims:
                ax = axis if isinstance(axis, tuple) else (axis,)
                ax = tuple(i % a.ndim for i in ax)
                gg = np.expand_dims(gg, ax)
            return (np.broadcast_to(gg, a.shape).copy(),)

        return self._node(out_data, (a,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.size
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            n = 1
            for i in ax:
                n *= self.shape[i % self.ndim]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return self._node(
            a.data.reshape(shape), (a,),
            lambda g: (g.reshape(a.shape),))

    def transpose(self, axes):
        a = self
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        return self._node(
            a.data.transpose(axes), (a,),
            lambda g: (g.transpose(inv),))

    def swapaxes(self, ax1: int, ax2: int):
        a = self
        return self._node(
            a.data.swapaxes(ax1, ax2), (a,),
            lambda g: (g.swapaxes(ax1, ax2),))

    def __getitem__(self, idx):
        a = self
        out_data = a.data[idx]

        def vjp(g):
            pg = np.zeros_like(a.data)
            if _is_fancy(idx):
                np.add.at(pg, idx, g)
            else:
                pg[idx] += g
            return (pg,)

        return self._node(out_data, (a,), vjp)

    # -- linear algebra ----------------------------------------------------

    def matmul(self, other):
        other = self._lift(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError("matmul requires tensors with ndim >= 2")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(
                f"matmul inner dimensions do not match: {a.shape} @ {b.shape}")
        out_data = a.data @ b.data

        def vjp(g):
            ga = g @ b.data.swapaxes(-1, -2)
            gb = a.data.swapaxes(-1, -2) @ g
            return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

        return self._node(out_data, (a, b), vjp)

    __matmul__ = matmul

    # -- softmax family -----------------------------------------------------

    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def vjp(g):
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            return ((g - inner) * out_data,)

        return self._node(out_data, (a,), vjp)

    def log_softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out_data = shifted - lse
        soft = np.exp(out_data)

        def vjp(g):
            return (g - soft * g.sum(axis=axis, keepdims=True),)

        return self._node(out_data, (a,), vjp)


def _is_fancy(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (np.ndarray, list)) for i in items)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    """Concatenate tensors along `axis`."""
    tensors = [Tensor._lift(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes[:-1])

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._node(out_data, tuple(tensors), vjp)


def stack(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Stack equally-shaped tensors along a new axis."""
    tensors = [Tensor._lift(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._node(out_data, tuple(tensors), vjp)


def pad(t: Tensor, pad_width) -> Tensor:
    """Zero-pad like ``np.pad`` with constant zeros."""
    t = Tensor._lift(t)
    pw = tuple((int(a), int(b)) for a, b in pad_width)
    out_data = np.pad(t.data, pw)
    sl = tuple(slice(a, a + n) for (a, _), n in zip(pw, t.shape))

    def vjp(g):
        return (g[sl],)

    return Tensor._node(out_data, (t,), vjp)


class Parameter(Tensor):
    """Trainable tensor; optimizer state (Adam m/v, step count) lives here."""

    __slots__ = ("name", "m", "v", "step")

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None
        self.step = 0
