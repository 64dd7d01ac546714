"""Minimal reverse-mode automatic differentiation over numpy arrays.

A tape-based engine in the micrograd style, but with array-valued nodes so
that whole matrix operations (matmul, inverse, slicing, concatenation) are
single nodes on the tape. Every public function dispatches on its argument
type: plain ndarrays go straight through numpy, `Tensor` arguments build the
graph. Model code is therefore written once and runs in both a fast
forward-only mode and a differentiable mode.

All arithmetic is float64.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(node, grad):
    if node.grad is None:
        node.grad = np.zeros_like(node.data)
    node.grad += grad


class Tensor:
    """Array node in the computation graph."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    # force ndarray <op> Tensor to defer to the reflected Tensor operators
    __array_ufunc__ = None

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(p for p in parents if isinstance(p, Tensor))
        self._backward = backward

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

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # -- graph traversal -----------------------------------------------

    def backward(self):
        """Accumulate gradients of `self` into every upstream node."""
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators -----------------------------------------------------

    def __add__(self, other):
        a, b = self, _wrap(other)
        out = Tensor(a.data + b.data, (a, b))

        def back(g):
            _accumulate(a, _unbroadcast(g, a.shape))
            _accumulate(b, _unbroadcast(g, b.shape))

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out._backward = lambda g: _accumulate(self, -g)
        return out

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        a, b = self, _wrap(other)
        out = Tensor(a.data * b.data, (a, b))

        def back(g):
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _wrap(other)
        out = Tensor(a.data / b.data, (a, b))

        def back(g):
            _accumulate(a, _unbroadcast(g / b.data, a.shape))
            _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = Tensor(self.data**exponent, (self,))
        out._backward = lambda g: _accumulate(
            self, g * exponent * self.data ** (exponent - 1)
        )
        return out

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __rmatmul__(self, other):
        return matmul(_wrap(other), self)

    def __getitem__(self, index):
        out = Tensor(self.data[index], (self,))

        def back(g):
            full = np.zeros_like(self.data)
            np.add.at(full, index, g)
            _accumulate(self, full)

        out._backward = back
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, (self,))
        out._backward = lambda g: _accumulate(self, g.T)
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        old = self.data.shape
        out = Tensor(self.data.reshape(shape), (self,))
        out._backward = lambda g: _accumulate(self, g.reshape(old))
        return out

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def item(self):
        return float(self.data)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def is_tensor(x):
    return isinstance(x, Tensor)


def value(x):
    """Underlying ndarray of a Tensor, or the array itself."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def make_node(data, parents, backward):
    """Create a graph node with a custom vector-Jacobian product."""
    return Tensor(data, parents, backward)


# -- linear algebra ------------------------------------------------------


def matmul(a, b):
    if not (isinstance(a, Tensor) or isinstance(b, Tensor)):
        return a @ b
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data @ b.data, (a, b))
    an, bn = a.data.ndim, b.data.ndim

    def back(g):
        if an == 2 and bn == 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)
        elif an == 2 and bn == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        elif an == 1 and bn == 2:
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))
        elif an == 1 and bn == 1:
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)
        else:  # pragma: no cover - not used by the models
            raise NotImplementedError("matmul grad only supports 1D/2D operands")

    out._backward = back
    return out


def transpose(a):
    return a.T if isinstance(a, Tensor) else np.asarray(a).T


def inv(a):
    """Matrix inverse with gradient d(A^-1) = -A^-1 dA A^-1."""
    if not isinstance(a, Tensor):
        return np.linalg.inv(a)
    c = np.linalg.inv(a.data)
    out = Tensor(c, (a,))
    out._backward = lambda g: _accumulate(a, -c.T @ g @ c.T)
    return out


def concat(parts, axis=0):
    if not any(isinstance(p, Tensor) for p in parts):
        return np.concatenate(parts, axis=axis)
    parts = [_wrap(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def back(g):
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + size)
            _accumulate(p, g[tuple(sl)])
            offset += size

    out._backward = back
    return out


# -- reductions -----------------------------------------------------------


def tsum(a, axis=None):
    if not isinstance(a, Tensor):
        return np.sum(a, axis=axis)
    out = Tensor(np.sum(a.data, axis=axis), (a,))

    def back(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

    out._backward = back
    return out


def tmean(a, axis=None):
    if not isinstance(a, Tensor):
        return np.mean(a, axis=axis)
    n = a.size if axis is None else a.shape[axis]
    return tsum(a, axis=axis) * (1.0 / n)


# -- elementwise ----------------------------------------------------------


def _unary(a, fn, dfn_from_xy):
    if not isinstance(a, Tensor):
        return fn(a)
    y = fn(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: _accumulate(a, g * dfn_from_xy(a.data, y))
    return out


def exp(a):
    return _unary(a, np.exp, lambda x, y: y)


def log(a):
    return _unary(a, np.log, lambda x, y: 1.0 / x)


def sqrt(a):
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y)


def sin(a):
    return _unary(a, np.sin, lambda x, y: np.cos(x))


def cos(a):
    return _unary(a, np.cos, lambda x, y: -np.sin(x))


def tanh(a):
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y)


def relu(a):
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(np.float64))
