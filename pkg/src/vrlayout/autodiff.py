"""Reverse-mode automatic differentiation over dense float64 arrays.

Define-by-run: every op records its parents and a backward closure on the
output node, and ``Tensor.backward()`` walks the graph once in reverse
topological order, accumulating (summing) gradients where a node feeds
several consumers. Values are float64 throughout; op outputs are checked for
NaN/Inf when debug checks are enabled.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

PROB_FLOOR = 1e-12


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle per-op finiteness checks on op outputs."""
    global _debug_checks
    _debug_checks = bool(enabled)


class Tensor:
    """A dense float64 array plus its place in the computation graph.

    Direct construction validates finiteness; op results are produced
    internally and checked only under debug mode. ``grad`` is allocated for
    nodes with ``requires_grad`` and is zero until ``backward`` reaches them.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor data contains NaN or Inf")
        self._init(arr, requires_grad, "leaf", (), None)

    def _init(self, arr, requires_grad, op, parents, backward):
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.op = op
        self._parents = parents
        self._backward = backward

    @classmethod
    def _result(cls, arr, op: str, parents: tuple, backward) -> "Tensor":
        if _debug_checks and not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite output from op {op!r}")
        out = cls.__new__(cls)
        needs = any(p.requires_grad for p in parents)
        out._init(
            np.asarray(arr, dtype=np.float64),
            needs,
            op,
            parents if needs else (),
            backward if needs else None,
        )
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into ``grad`` for every reachable node.

        Requires a scalar output. Each node is visited exactly once, in
        reverse topological order.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r})"


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _accum(node: Tensor, grad: np.ndarray) -> None:
    if node.requires_grad:
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad = node.grad + grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(grad):
        _accum(a, _unbroadcast(grad, a.shape))
        _accum(b, _unbroadcast(grad, b.shape))

    return Tensor._result(a.data + b.data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(grad):
        _accum(a, _unbroadcast(grad, a.shape))
        _accum(b, _unbroadcast(-grad, b.shape))

    return Tensor._result(a.data - b.data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(grad):
        _accum(a, _unbroadcast(grad * b.data, a.shape))
        _accum(b, _unbroadcast(grad * a.data, b.shape))

    return Tensor._result(a.data * b.data, "mul", (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "div")

    def backward(grad):
        _accum(a, _unbroadcast(grad / b.data, a.shape))
        _accum(b, _unbroadcast(-grad * a.data / (b.data * b.data), b.shape))

    return Tensor._result(a.data / b.data, "div", (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(grad):
        _accum(a, grad @ b.data.T)
        _accum(b, a.data.T @ grad)

    return Tensor._result(a.data @ b.data, "matmul", (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("concat: empty input list")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * grad.ndim
            idx[axis] = slice(lo, hi)
            _accum(part, grad[tuple(idx)])

    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[p.shape for p in parts]}"
        ) from None
    return Tensor._result(out, "concat", tuple(parts), backward)


def slice_axis(t: Tensor, axis: int, start: int, stop: int) -> Tensor:
    t = _as_tensor(t)
    if not (0 <= start <= stop <= t.shape[axis]):
        raise ShapeError(
            f"slice: range [{start}, {stop}) invalid for shape {t.shape} axis {axis}"
        )
    idx = [slice(None)] * t.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def backward(grad):
        full = np.zeros_like(t.data)
        full[idx] = grad
        _accum(t, full)

    return Tensor._result(t.data[idx], "slice", (t,), backward)


def relu(t) -> Tensor:
    t = _as_tensor(t)
    mask = t.data > 0.0

    def backward(grad):
        _accum(t, grad * mask)

    return Tensor._result(np.where(mask, t.data, 0.0), "relu", (t,), backward)


def sigmoid(t) -> Tensor:
    t = _as_tensor(t)
    out = np.empty_like(t.data)
    pos = t.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t.data[pos]))
    ez = np.exp(t.data[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(grad):
        _accum(t, grad * out * (1.0 - out))

    return Tensor._result(out, "sigmoid", (t,), backward)


def softmax(t, axis: int = -1) -> Tensor:
    t = _as_tensor(t)
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    ez = np.exp(shifted)
    out = ez / ez.sum(axis=axis, keepdims=True)

    def backward(grad):
        inner = (grad * out).sum(axis=axis, keepdims=True)
        _accum(t, (grad - inner) * out)

    return Tensor._result(out, "softmax", (t,), backward)


def sum(t, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    t = _as_tensor(t)
    out = t.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        g = np.asarray(grad)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(t, np.broadcast_to(g, t.shape).copy())

    return Tensor._result(out, "sum", (t,), backward)


def mean(t) -> Tensor:
    t = _as_tensor(t)
    n = t.data.size

    def backward(grad):
        _accum(t, np.full(t.shape, float(grad) / n))

    return Tensor._result(t.data.mean(), "mean", (t,), backward)


def mse(a, b) -> Tensor:
    """Mean squared error over all elements."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: incompatible shapes {a.shape} and {b.shape}")
    diff = a.data - b.data
    n = diff.size

    def backward(grad):
        g = 2.0 * float(grad) / n * diff
        _accum(a, g)
        _accum(b, -g)

    return Tensor._result((diff * diff).mean(), "mse", (a, b), backward)


def cross_entropy(probs, one_hot) -> Tensor:
    """Total cross-entropy, summed over rows, of probability rows against
    one-hot targets. Probabilities are clamped to [1e-12, 1] before the log.
    """
    probs, one_hot = _as_tensor(probs), _as_tensor(one_hot)
    if probs.shape != one_hot.shape:
        raise ShapeError(
            f"cross_entropy: incompatible shapes {probs.shape} and {one_hot.shape}"
        )
    clamped = np.clip(probs.data, PROB_FLOOR, 1.0)
    value = -(one_hot.data * np.log(clamped)).sum()
    pass_through = (probs.data >= PROB_FLOOR) & (probs.data <= 1.0)

    def backward(grad):
        _accum(probs, -float(grad) * one_hot.data / clamped * pass_through)

    return Tensor._result(value, "cross_entropy", (probs, one_hot), backward)


def gradient_check(
    f: Callable[[Tensor], Tensor], x, h: float = 1e-4
) -> float:
    """Compare reverse-mode gradients of a scalar function against central
    finite differences at step ``h``.

    Returns the max over coordinates of
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    base = np.array(_as_tensor(x).data, dtype=np.float64)
    leaf = Tensor(base.copy(), requires_grad=True)
    out = f(leaf)
    if out.size != 1:
        raise ValueError("gradient_check requires a scalar-valued function")
    out.backward()
    analytic = leaf.grad.reshape(-1)

    flat = base.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        probe = flat.copy()
        probe[i] = flat[i] + h
        hi = f(Tensor(probe.reshape(base.shape))).item()
        probe[i] = flat[i] - h
        lo = f(Tensor(probe.reshape(base.shape))).item()
        numeric = (hi - lo) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
