"""Minimal reverse-mode tape over float64 numpy arrays.

Just enough operator coverage for the decision core: elementwise arithmetic,
matmul, reductions, softmax/log/sigmoid, gather-style constant matmuls, and
a straight-through stop-gradient.  Tensors are rank 3 at most in practice;
shapes are checked where mistakes are cheap to make.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    # -- graph ---------------------------------------------------------------

    def backward(self, seed: np.ndarray | None = None) -> None:
        if seed is None:
            if self.data.ndim != 0:
                raise ValueError("backward() without seed requires a scalar")
            seed = np.asarray(1.0)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is not None:
                for parent, pg in node._backward(g):
                    if not parent.requires_grad:
                        continue
                    if id(parent) in grads:
                        grads[id(parent)] = grads[id(parent)] + pg
                    else:
                        grads[id(parent)] = pg
            if node._parents == () and node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        _check_broadcast(self.shape, other.shape)

        def bw(g):
            return ((self, _unbroadcast(g, self.shape)), (other, _unbroadcast(g, other.shape)))

        return Tensor(self.data + other.data, parents=(self, other), backward=bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        _check_broadcast(self.shape, other.shape)

        def bw(g):
            return ((self, _unbroadcast(g, self.shape)), (other, _unbroadcast(-g, other.shape)))

        return Tensor(self.data - other.data, parents=(self, other), backward=bw)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        _check_broadcast(self.shape, other.shape)

        def bw(g):
            return (
                (self, _unbroadcast(g * other.data, self.shape)),
                (other, _unbroadcast(g * self.data, other.shape)),
            )

        return Tensor(self.data * other.data, parents=(self, other), backward=bw)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        other = as_tensor(other)

        def bw(g):
            return (
                (self, _unbroadcast(g / other.data, self.shape)),
                (other, _unbroadcast(-g * self.data / other.data**2, other.shape)),
            )

        return Tensor(self.data / other.data, parents=(self, other), backward=bw)

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul expects rank-2 tensors")
        if self.shape[1] != other.shape[0]:
            raise ValueError(f"matmul shape mismatch {self.shape} @ {other.shape}")

        def bw(g):
            return ((self, g @ other.data.T), (other, self.data.T @ g))

        return Tensor(self.data @ other.data, parents=(self, other), backward=bw)

    def sum(self, axis=None):
        def bw(g):
            if axis is None:
                return ((self, np.broadcast_to(g, self.shape).copy()),)
            return ((self, np.broadcast_to(np.expand_dims(g, axis), self.shape).copy()),)

        return Tensor(self.data.sum(axis=axis), parents=(self,), backward=bw)

    def reshape(self, *shape):
        def bw(g):
            return ((self, g.reshape(self.shape)),)

        return Tensor(self.data.reshape(*shape), parents=(self,), backward=bw)

    def max_over_rows(self):
        """Column-wise max of a (n, d) tensor; gradient flows to argmax rows."""
        if self.data.ndim != 2:
            raise ValueError("max_over_rows expects a rank-2 tensor")
        idx = np.argmax(self.data, axis=0)

        def bw(g):
            out = np.zeros_like(self.data)
            out[idx, np.arange(self.data.shape[1])] = g
            return ((self, out),)

        return Tensor(self.data[idx, np.arange(self.data.shape[1])], parents=(self,), backward=bw)

    def exp(self):
        out = np.exp(self.data)

        def bw(g):
            return ((self, g * out),)

        return Tensor(out, parents=(self,), backward=bw)

    def log(self):
        def bw(g):
            return ((self, g / self.data),)

        return Tensor(np.log(self.data), parents=(self,), backward=bw)

    def abs(self):
        def bw(g):
            return ((self, g * np.sign(self.data)),)

        return Tensor(np.abs(self.data), parents=(self,), backward=bw)

    def sigmoid(self):
        out = 1.0 / (1.0 + np.exp(-self.data))

        def bw(g):
            return ((self, g * out * (1.0 - out)),)

        return Tensor(out, parents=(self,), backward=bw)

    def clamp_min(self, floor: float):
        mask = (self.data > floor).astype(np.float64)

        def bw(g):
            return ((self, g * mask),)

        return Tensor(np.maximum(self.data, floor), parents=(self,), backward=bw)

    def __getitem__(self, key):
        def bw(g):
            out = np.zeros_like(self.data)
            np.add.at(out, key, g)
            return ((self, out),)

        return Tensor(self.data[key], parents=(self,), backward=bw)

    def __repr__(self):  # pragma: no cover - debug aid
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _check_broadcast(a, b) -> None:
    try:
        np.broadcast_shapes(a, b)
    except ValueError as exc:
        raise ValueError(f"incompatible shapes {a} and {b}") from exc


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g down to ``shape`` (reverse of numpy broadcasting)."""
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def const_matmul(mat: np.ndarray, t: Tensor) -> Tensor:
    """(m, n) constant @ (n, d) tensor; cheap gather/scatter building block."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or t.data.ndim != 2 or mat.shape[1] != t.data.shape[0]:
        raise ValueError(f"const_matmul shape mismatch {mat.shape} @ {t.shape}")

    def bw(g):
        return ((t, mat.T @ g),)

    return Tensor(mat @ t.data, parents=(t,), backward=bw)


def scale_rows(mat: np.ndarray, s: Tensor) -> Tensor:
    """Row-scale a constant (n, d) matrix by a length-n tensor."""
    mat = np.asarray(mat, dtype=np.float64)
    if s.data.ndim != 1 or mat.shape[0] != s.data.shape[0]:
        raise ValueError(f"scale_rows shape mismatch {mat.shape} by {s.shape}")

    def bw(g):
        return ((s, (g * mat).sum(axis=1)),)

    return Tensor(mat * s.data[:, None], parents=(s,), backward=bw)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (n, d) tensors along columns."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_cols shape mismatch {a.shape} | {b.shape}")
    da = a.shape[1]

    def bw(g):
        return ((a, g[:, :da]), (b, g[:, da:]))

    return Tensor(np.concatenate([a.data, b.data], axis=1), parents=(a, b), backward=bw)


def stack_rows(ts: list[Tensor]) -> Tensor:
    """Stack scalar tensors into a vector."""

    def bw(g):
        return tuple((t, g[i]) for i, t in enumerate(ts))

    return Tensor(np.array([t.data for t in ts]), parents=tuple(ts), backward=bw)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    z = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((t, out * (g - dot)),)

    return Tensor(out, parents=(t,), backward=bw)


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    z = t.data - t.data.max(axis=axis, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - logsum

    def bw(g):
        p = np.exp(out)
        return ((t, g - p * g.sum(axis=axis, keepdims=True)),)

    return Tensor(out, parents=(t,), backward=bw)


def straight_through(hard: np.ndarray, relaxed: Tensor) -> Tensor:
    """Forward the hard values exactly; route gradients to the relaxed ones."""
    if np.shape(hard) != relaxed.shape:
        raise ValueError("straight_through shape mismatch")

    def bw(g):
        return ((relaxed, g),)

    return Tensor(np.asarray(hard, dtype=np.float64), parents=(relaxed,), backward=bw)
