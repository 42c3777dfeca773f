"""Reverse-mode differentiation over a closed op set.

Every op has a hand-checkable adjoint; there is no general tape over
arbitrary code. Values are float64 throughout (storage formats downcast
to float32 separately).
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, name=None, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.value.shape})"

    # operator sugar; constants are promoted automatically
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __neg__(self):
        return scale(self, -1.0)


def parameter(value, name: str) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def constant(value) -> Tensor:
    return Tensor(value)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward):
    if any(p.requires_grad for p in parents):
        out = Tensor(value, requires_grad=True, _parents=tuple(parents), _backward=backward)
    else:
        out = Tensor(value)
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    # reduce a broadcast gradient back to the parent's shape
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _node(a.value + b.value, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return _node(a.value - b.value, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value

    def backward(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _node(av * bv, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    def backward(g):
        return (g * c,)

    return _node(a.value * c, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value

    def backward(g):
        if av.ndim == 1 and bv.ndim == 2:  # (n,) @ (n,m) -> (m,)
            return g @ bv.T, np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:  # (n,m) @ (m,) -> (n,)
            return np.outer(g, bv), av.T @ g
        if av.ndim == 1 and bv.ndim == 1:  # dot -> scalar
            return g * bv, g * av
        return g @ bv.T, av.T @ g  # (n,m) @ (m,k)

    return _node(av @ bv, (a, b), backward)


def absolute(a: Tensor) -> Tensor:
    av = a.value

    def backward(g):
        # subgradient 0 at exactly 0
        return (g * np.sign(av),)

    return _node(np.abs(av), (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out_v = 1.0 / (1.0 + np.exp(-a.value))

    def backward(g):
        return (g * out_v * (1.0 - out_v),)

    return _node(out_v, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_v = np.tanh(a.value)

    def backward(g):
        return (g * (1.0 - out_v * out_v),)

    return _node(out_v, (a,), backward)


def log(a: Tensor) -> Tensor:
    av = a.value

    def backward(g):
        return (g / av,)

    return _node(np.log(av), (a,), backward)


def clamp_min(a: Tensor, floor: float) -> Tensor:
    av = a.value
    mask = av > floor

    def backward(g):
        return (g * mask,)

    return _node(np.maximum(av, floor), (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Stable softmax over the last axis (max-subtraction)."""
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_v = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * out_v).sum(axis=-1, keepdims=True)
        return (out_v * (g - inner),)

    return _node(out_v, (a,), backward)


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    av = a.value

    def backward(g):
        if axis is None:
            return (np.full_like(av, g / av.size),)
        n = av.shape[axis]
        return (np.repeat(np.expand_dims(g / n, axis), n, axis=axis),)

    return _node(av.mean(axis=axis), (a,), backward)


def total(a: Tensor) -> Tensor:
    av = a.value

    def backward(g):
        return (np.full_like(av, g),)

    return _node(av.sum(), (a,), backward)


def concat(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.value.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _node(np.concatenate([p.value for p in parts]), tuple(parts), backward)


def stack(rows: Sequence[Tensor]) -> Tensor:
    rows = [as_tensor(r) for r in rows]

    def backward(g):
        return tuple(g[i] for i in range(len(rows)))

    return _node(np.stack([r.value for r in rows]), tuple(rows), backward)


def pick(a: Tensor, index: int) -> Tensor:
    def backward(g):
        out = np.zeros_like(a.value)
        out[index] = g
        return (out,)

    return _node(a.value[index], (a,), backward)


def rows_mean(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Mean of the selected rows of an embedding table (gather + mean)."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.size == 0:
        value = np.zeros(table.value.shape[1])

        def backward_empty(g):
            return (np.zeros_like(table.value),)

        return _node(value, (table,), backward_empty)

    def backward(g):
        out = np.zeros_like(table.value)
        np.add.at(out, idx, g / idx.size)
        return (out,)

    return _node(table.value[idx].mean(axis=0), (table,), backward)


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into ``.grad`` of graph nodes."""
    if loss.value.ndim != 0:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.value.shape}")
    order: List[Tensor] = []
    seen = set()
    stack_ = [loss]
    while stack_:
        node = stack_[-1]
        if id(node) in seen:
            stack_.pop()
            continue
        pending = [p for p in node._parents if id(p) not in seen and p.requires_grad]
        if pending:
            stack_.extend(pending)
            continue
        seen.add(id(node))
        order.append(node)
        stack_.pop()

    grads: Dict[int, np.ndarray] = {id(loss): np.asarray(1.0)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad and node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def check_gradients(loss_fn, params: Dict[str, Tensor], eps: float = 1e-6,
                    rtol: float = 1e-5, atol: float = 1e-8) -> float:
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn`` rebuilds the loss from the current parameter values. Returns
    the worst relative error seen; raises AssertionError on mismatch.
    """
    zero_grads(params.values())
    loss = loss_fn()
    backward(loss)
    analytic = {name: (np.zeros_like(p.value) if p.grad is None else p.grad.copy())
                for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        got = analytic[name].reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = float(loss_fn().value)
            flat[i] = keep - eps
            down = float(loss_fn().value)
            flat[i] = keep
            fd = (up - down) / (2.0 * eps)
            err = abs(fd - got[i])
            if err <= atol:
                continue  # below the finite-difference noise floor
            denom = max(abs(fd), abs(got[i]))
            rel = err / denom
            if rel > rtol:
                raise AssertionError(
                    f"gradient mismatch for {name}[{i}]: analytic={got[i]:.10g} "
                    f"fd={fd:.10g} rel={rel:.3g}"
                )
            worst = max(worst, rel)
    return worst
