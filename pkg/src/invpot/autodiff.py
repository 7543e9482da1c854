"""A small reverse-mode tape over numpy arrays.

Only the handful of operations the jet propagation and the loss need are
supported: elementwise arithmetic with broadcasting, ``tanh``, products with
a weight matrix, sums and basic indexing. Every operation records its
parents and a vector-Jacobian closure; :func:`backward` walks the tape in
reverse creation order.
"""
from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np


class NumericError(FloatingPointError):
    """A non-finite value appeared during evaluation or differentiation."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


_counter = itertools.count()


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """Array value recorded on the tape.

    ``parents`` is a tuple of ``(Var, vjp)`` pairs where ``vjp`` maps the
    output cotangent to the parent's cotangent.
    """

    __slots__ = ("value", "parents", "label", "order", "grad")
    __array_ufunc__ = None

    def __init__(self, value, parents=(), label: str = "leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.label = label
        self.order = next(_counter)
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var({self.label}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other) if isinstance(other, Var) else -np.asarray(other))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def add(a, b) -> Var | np.ndarray:
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.add(a, b)
    av, bv = value_of(a), value_of(b)
    out = av + bv
    parents = []
    if isinstance(a, Var):
        parents.append((a, lambda g, s=av.shape: _unbroadcast(g, s)))
    if isinstance(b, Var):
        parents.append((b, lambda g, s=bv.shape: _unbroadcast(g, s)))
    return Var(out, tuple(parents), "add")


def neg(a):
    if not isinstance(a, Var):
        return -np.asarray(a)
    return Var(-a.value, ((a, np.negative),), "neg")


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.multiply(a, b)
    av, bv = value_of(a), value_of(b)
    out = av * bv
    parents = []
    if isinstance(a, Var):
        parents.append((a, lambda g: _unbroadcast(g * bv, av.shape)))
    if isinstance(b, Var):
        parents.append((b, lambda g: _unbroadcast(g * av, bv.shape)))
    return Var(out, tuple(parents), "mul")


def square(a):
    if not isinstance(a, Var):
        a = np.asarray(a)
        return a * a
    av = a.value
    return Var(av * av, ((a, lambda g: 2.0 * g * av),), "square")


def tanh(a):
    if not isinstance(a, Var):
        return np.tanh(a)
    s = np.tanh(a.value)
    return Var(s, ((a, lambda g: g * (1.0 - s * s)),), "tanh")


def sqrt(a):
    if not isinstance(a, Var):
        return np.sqrt(a)
    r = np.sqrt(a.value)
    return Var(r, ((a, lambda g: g * 0.5 / r),), "sqrt")


def linear(h, w):
    """``h @ w.T`` where ``h`` has shape (..., n_in) and ``w`` (n_out, n_in)."""
    if not isinstance(h, Var) and not isinstance(w, Var):
        return np.matmul(h, np.transpose(w))
    hv, wv = value_of(h), value_of(w)
    out = hv @ wv.T
    parents = []
    if isinstance(h, Var):
        parents.append((h, lambda g: _unbroadcast(g @ wv, hv.shape)))
    if isinstance(w, Var):
        def vjp_w(g):
            g2 = g.reshape(-1, g.shape[-1])
            h2 = np.broadcast_to(hv, g.shape[:-1] + hv.shape[-1:]).reshape(-1, hv.shape[-1])
            return g2.T @ h2
        parents.append((w, vjp_w))
    return Var(out, tuple(parents), "linear")


def total(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    av = a.value
    out = np.sum(av, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape).copy()

    return Var(out, ((a, vjp),), "sum")


def getitem(a, idx):
    """Basic (slice/integer) indexing; fancy indexing is not supported."""
    if not isinstance(a, Var):
        return np.asarray(a)[idx]
    av = a.value

    def vjp(g):
        out = np.zeros_like(av)
        out[idx] = g
        return out

    return Var(av[idx], ((a, vjp),), "getitem")


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    old = a.value.shape
    return Var(a.value.reshape(shape), ((a, lambda g: g.reshape(old)),), "reshape")


def transpose(a):
    if not isinstance(a, Var):
        return np.transpose(a)
    return Var(a.value.T, ((a, np.transpose),), "transpose")


def squeeze_last(a):
    if not isinstance(a, Var):
        return np.asarray(a)[..., 0]
    shape = a.value.shape
    return Var(a.value[..., 0], ((a, lambda g: g.reshape(shape)),), "squeeze")


def label(a, name: str):
    """Attach a human-readable name to the node (used in error reports)."""
    if isinstance(a, Var):
        a.label = name
    return a


def _topological(root: Var) -> list[Var]:
    seen = {id(root)}
    stack = [root]
    nodes = []
    while stack:
        node = stack.pop()
        nodes.append(node)
        for parent, _ in node.parents:
            if id(parent) not in seen:
                seen.add(id(parent))
                stack.append(parent)
    nodes.sort(key=lambda n: n.order, reverse=True)
    return nodes


_OP_LABELS = frozenset({"add", "getitem", "leaf", "linear", "mul", "neg", "reshape", "sqrt",
                        "square", "squeeze", "sum", "tanh", "transpose"})


def first_nonfinite(root: Var, named: bool = False) -> Var | None:
    """Earliest-created node below ``root`` holding a non-finite value.

    With ``named=True`` only nodes given a name through :func:`label` count.
    """
    for node in reversed(_topological(root)):
        if named and node.label in _OP_LABELS:
            continue
        if not np.all(np.isfinite(node.value)):
            return node
    return None


def backward(root: Var) -> None:
    """Accumulate d(root)/d(node) into ``node.grad`` for every ancestor."""
    if root.value.size != 1:
        raise ValueError("backward() needs a scalar output")
    nodes = _topological(root)
    for node in nodes:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in nodes:
        g = node.grad
        if g is None:
            continue
        for parent, vjp in node.parents:
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = contrib
            else:
                parent.grad = parent.grad + contrib


def grad(fn: Callable[..., Var], arrays: Sequence[np.ndarray]) -> tuple[float, list[np.ndarray]]:
    """Value and gradient of a scalar function of several arrays."""
    leaves = [Var(np.array(a, dtype=np.float64, copy=True)) for a in arrays]
    out = fn(*leaves)
    if not isinstance(out, Var):
        return float(out), [np.zeros_like(leaf.value) for leaf in leaves]
    if not np.all(np.isfinite(out.value)):
        bad = first_nonfinite(out, named=True) or first_nonfinite(out)
        name = bad.label if bad is not None else out.label
        raise NumericError(f"non-finite value in term '{name}'", term=name)
    backward(out)
    grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]
    return float(out.value), grads
