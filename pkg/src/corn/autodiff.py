"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Just enough machinery for a small pre-norm transformer: leaf tensors hold
parameters, each op records vector-Jacobian callbacks, and backward() walks
the graph in reverse topological order. Everything stays in 64-bit so
finite-difference checks at h=1e-5 are meaningful.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    __slots__ = ("values", "grad", "_parents", "_vjps")

    def __init__(self, values, parents=(), vjps=()):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._vjps = tuple(vjps)

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, leaf={not self._parents})"


def tensor(values) -> Tensor:
    return Tensor(values)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.values + b.values,
        (a, b),
        (lambda g: _unbroadcast(g, a.values.shape), lambda g: _unbroadcast(g, b.values.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.values * b.values,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.values, a.values.shape),
            lambda g: _unbroadcast(g * a.values, b.values.shape),
        ),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.values * c, (a,), (lambda g: g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def grad_a(g):
        return _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.values.shape)

    def grad_b(g):
        return _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.values.shape)

    return Tensor(a.values @ b.values, (a, b), (grad_a, grad_b))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def reshape(a: Tensor, shape) -> Tensor:
    return Tensor(a.values.reshape(shape), (a,), (lambda g: g.reshape(a.values.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    return Tensor(a.values.transpose(axes), (a,), (lambda g: g.transpose(inverse),))


def concat(tensors, axis: int) -> Tensor:
    sizes = [t.values.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        def vjp(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            return g[tuple(sl)]

        return vjp

    return Tensor(
        np.concatenate([t.values for t in tensors], axis=axis),
        tuple(tensors),
        tuple(make_vjp(i) for i in range(len(tensors))),
    )


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    sl = [slice(None)] * a.values.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def vjp(g):
        out = np.zeros_like(a.values)
        out[sl] = g
        return out

    return Tensor(a.values[sl], (a,), (vjp,))


def gelu(a: Tensor) -> Tensor:
    x = a.values
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def vjp(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return g * (cdf + x * pdf)

    return Tensor(out, (a,), (vjp,))


def softmax(a: Tensor) -> Tensor:
    x = a.values
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return y * (g - np.sum(g * y, axis=-1, keepdims=True))

    return Tensor(y, (a,), (vjp,))


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x = a.values
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.values + beta.values

    def vjp_x(g):
        dxhat = g * gamma.values
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * (dxhat - m1 - xhat * m2)

    def vjp_gamma(g):
        return _unbroadcast(g * xhat, gamma.values.shape)

    def vjp_beta(g):
        return _unbroadcast(g, beta.values.shape)

    return Tensor(out, (a, gamma, beta), (vjp_x, vjp_gamma, vjp_beta))


def bce_with_logits_mean(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy in the numerically stable form
    max(z, 0) - z*y + log(1 + exp(-|z|))."""
    z = logits.values
    y = np.asarray(labels, dtype=np.float64)
    value = np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z))))

    def vjp(g):
        sig = 1.0 / (1.0 + np.exp(-z))
        return g * (sig - y) / z.size

    return Tensor(value, (logits,), (vjp,))


def backward(root: Tensor) -> None:
    """Accumulate gradients of `root` (any shape; seeded with ones) into
    every reachable tensor's .grad."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.values)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            g = vjp(node.grad)
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g
