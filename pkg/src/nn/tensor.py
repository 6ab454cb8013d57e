"""Reverse-mode automatic differentiation over numpy arrays.

Operations executed inside ``with Graph() as graph:`` are recorded on the
graph's tape in execution order, which is a topological order by
construction. ``graph.backward(out)`` walks the tape in reverse and
accumulates vector-Jacobian products into every tensor that requires a
gradient. Outside a graph, operations only compute values.
"""

from __future__ import annotations

import logging
import threading
from typing import Callable, Sequence

import numpy as np

from src.errors import GraphStateError, ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()


def _stack() -> list[Graph]:
    if not hasattr(_state, "graphs"):
        _state.graphs = []
    return _state.graphs


class Graph:
    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self._ids: set[int] = set()
        self._released = False

    def __enter__(self) -> Graph:
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    @staticmethod
    def current() -> Graph | None:
        stack = _stack()
        return stack[-1] if stack else None

    def record(self, node: Tensor) -> None:
        if self._released:
            raise GraphStateError("graph was already released by backward()")
        self.nodes.append(node)
        self._ids.add(id(node))

    def backward(self, output: Tensor, grad: np.ndarray | None = None) -> None:
        if self._released:
            raise GraphStateError("backward() already ran on this graph")
        if not self.nodes or id(output) not in self._ids:
            raise GraphStateError("backward() called before a forward pass recorded the output")
        seed = np.ones_like(output.data) if grad is None else np.asarray(grad, dtype=output.data.dtype)
        if seed.shape != output.data.shape:
            raise ShapeError(f"output gradient {seed.shape} does not match output {output.data.shape}")
        output.grad = seed
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)
        for node in self.nodes:
            node._backward = None
            node._parents = ()
        self._released = True


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 100

    def __init__(
        self,
        data: np.ndarray | float | Sequence,
        requires_grad: bool = False,
        name: str = "",
        dtype: np.dtype | type | None = None,
    ) -> None:
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype.kind not in "fi":
            raise ShapeError(f"tensor '{name}' must hold numbers, got {self.data.dtype}")
        if self.data.dtype.kind == "i":
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    def __repr__(self) -> str:
        return f"Tensor(name={self.name!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(grad, self.data.shape)
        grad = grad.astype(self.data.dtype, copy=False)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    # operator sugar
    def __add__(self, other) -> Tensor:
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other) -> Tensor:
        return sub(other, self)

    def __mul__(self, other) -> Tensor:
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other) -> Tensor:
        return matmul(self, other)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes)


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None], name: str) -> Tensor:
    graph = Graph.current()
    needs_grad = graph is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad, name=name)
    if needs_grad:
        out._parents = tuple(parents)
        out._backward = backward
        graph.record(out)
    return out


def add(a, b, name: str = "add") -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}") from exc

    def backward(g: np.ndarray) -> None:
        a.accumulate(g)
        b.accumulate(g)

    return _make(data, (a, b), backward, name)


def sub(a, b, name: str = "sub") -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}") from exc

    def backward(g: np.ndarray) -> None:
        a.accumulate(g)
        b.accumulate(-g)

    return _make(data, (a, b), backward, name)


def mul(a, b, name: str = "mul") -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}") from exc

    def backward(g: np.ndarray) -> None:
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    return _make(data, (a, b), backward, name)


def matmul(a: Tensor, b: Tensor, name: str = "matmul") -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"{name}: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"{name}: inner dimensions differ, {a.shape} @ {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast batch dims of {a.shape} and {b.shape}") from exc

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(np.matmul(g, np.swapaxes(b.data, -1, -2)))
        if b.requires_grad:
            b.accumulate(np.matmul(np.swapaxes(a.data, -1, -2), g))

    return _make(data, (a, b), backward, name)


def relu(x: Tensor, name: str = "relu") -> Tensor:
    data = np.maximum(x.data, 0)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * (x.data > 0))

    return _make(data, (x,), backward, name)


def softmax(x: Tensor, name: str = "softmax") -> Tensor:
    """Softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        x.accumulate(y * (g - np.sum(g * y, axis=-1, keepdims=True)))

    return _make(y, (x,), backward, name)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5, name: str = "layer_norm") -> Tensor:
    if x.shape[-1] != gamma.shape[-1] or gamma.shape != beta.shape:
        raise ShapeError(f"{name}: features {x.shape[-1]} vs gain {gamma.shape} / bias {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt(np.mean(centered**2, axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    data = xhat * gamma.data + beta.data
    n = x.shape[-1]

    def backward(g: np.ndarray) -> None:
        gamma.accumulate(g * xhat)
        beta.accumulate(g)
        if x.requires_grad:
            gx = g * gamma.data
            x.accumulate(
                inv_std / n * (n * gx - gx.sum(axis=-1, keepdims=True) - xhat * np.sum(gx * xhat, axis=-1, keepdims=True))
            )

    return _make(data, (x, gamma, beta), backward, name)


def dropout(
    x: Tensor, p: float, rng: np.random.Generator | None, training: bool, name: str = "dropout"
) -> Tensor:
    """Inverted dropout; identity when not training."""
    if not training or p <= 0:
        return x
    if rng is None:
        raise GraphStateError(f"{name}: dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * keep)

    return _make(x.data * keep, (x,), backward, name)


def embedding(table: Tensor, indices: np.ndarray | Sequence[int], name: str = "embedding") -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"{name}: index out of range for a table of {table.shape[0]} rows")
    data = table.data[idx]

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        table.accumulate(full)

    return _make(data, (table,), backward, name)


def concat(tensors: Sequence[Tensor], axis: int = -1, name: str = "concat") -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot concatenate {[t.shape for t in tensors]} on axis {axis}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> None:
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            t.accumulate(piece)

    return _make(data, tensors, backward, name)


def reshape(x: Tensor, shape: Sequence[int], name: str = "reshape") -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot reshape {x.shape} to {tuple(shape)}") from exc

    def backward(g: np.ndarray) -> None:
        x.accumulate(g.reshape(x.shape))

    return _make(data, (x,), backward, name)


def transpose(x: Tensor, axes: Sequence[int], name: str = "transpose") -> Tensor:
    axes = tuple(axes)
    data = np.transpose(x.data, axes)
    inverse = tuple(np.argsort(axes))

    def backward(g: np.ndarray) -> None:
        x.accumulate(np.transpose(g, inverse))

    return _make(data, (x,), backward, name)


def sum_(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False, name: str = "sum") -> Tensor:
    data = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x.accumulate(np.broadcast_to(g, x.shape))

    return _make(np.asarray(data), (x,), backward, name)


def mean(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False, name: str = "mean") -> Tensor:
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum_(x, axis=axis, keepdims=keepdims, name=name), 1.0 / count, name=f"{name}/scale")


def apply_loss(
    pred: Tensor, fn: Callable[[np.ndarray], tuple[float, np.ndarray]], name: str = "loss"
) -> Tensor:
    """Scalar node for a numpy loss returning (value, d value / d pred)."""
    value, grad = fn(pred.data)
    grad = np.asarray(grad)
    if grad.shape != pred.shape:
        raise ShapeError(f"{name}: loss gradient {grad.shape} does not match prediction {pred.shape}")

    def backward(g: np.ndarray) -> None:
        pred.accumulate(grad * g)

    return _make(np.asarray(value, dtype=pred.data.dtype), (pred,), backward, name)
