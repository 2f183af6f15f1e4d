"""Minimal reverse-mode automatic differentiation over real numpy tensors.

A Tape records nodes in creation order, which is already a topological
order of the forward graph; `backward` walks it once in reverse and
accumulates gradients additively. Gradients are plain numpy arrays of the
same dtype as the values. Everything is single-threaded and deterministic:
same graph, same numbers.

The quaternion structure of the networks lives entirely in how the forward
graph is wired (Hamilton-structured block matrices, the fused quaternion
activation); the derivatives propagated here are ordinary componentwise
real ones.
"""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import activations as _act
from .backends import active as _backend
from .quaternion import eps_for


class Tape:
    """Single-writer record of one forward computation.

    Nodes reference the tape and the tape references its nodes, so a used
    tape is a reference cycle holding every intermediate buffer; `close`
    (or the context-manager form) breaks it eagerly instead of waiting for
    the garbage collector.
    """

    def __init__(self):
        self._nodes: List["Var"] = []

    def var(self, value, requires_grad: bool = False, name: str = "") -> "Var":
        return Var(self, np.asarray(value), requires_grad=requires_grad, name=name)

    def _register(self, var: "Var") -> None:
        var._index = len(self._nodes)
        self._nodes.append(var)

    def close(self) -> None:
        for node in self._nodes:
            node._backward = None
            node._parents = ()
        self._nodes.clear()

    def __enter__(self) -> "Tape":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def backward(self, loss: "Var") -> Dict["Var", np.ndarray]:
        """Accumulate d loss / d leaf for every requires_grad leaf.

        Visits nodes in reverse creation order exactly once; returns the
        gradient map and also leaves `.grad` set on the touched variables.
        """
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._nodes[:loss._index + 1]):
            if node.grad is None or node._backward is None or not node._needs:
                continue
            node._backward(node.grad)
        return {node: node.grad for node in self._nodes
                if node.requires_grad and node._backward is None and node.grad is not None}


class Var:
    """One tape node: a value, an optional backward rule, parent links."""

    __slots__ = ("tape", "value", "requires_grad", "grad", "name",
                 "_backward", "_parents", "_index", "_needs")

    # defer mixed ndarray-Var arithmetic to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, tape: Tape, value: np.ndarray, requires_grad: bool = False,
                 name: str = "", parents: Sequence["Var"] = (),
                 backward: Optional[Callable] = None):
        self.tape = tape
        self.value = value
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._backward = backward
        self._parents = tuple(parents)
        self._needs = requires_grad or any(p._needs for p in parents)
        tape._register(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def _accumulate(self, g: np.ndarray) -> None:
        if not self._needs:
            return
        g = np.asarray(g, dtype=self.value.dtype)
        self.grad = g if self.grad is None else self.grad + g

    def _coerce(self, other) -> "Var":
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ValueError("operands recorded on different tapes")
            return other
        return Var(self.tape, np.asarray(other, dtype=self.value.dtype))

    # ---- elementwise arithmetic (numpy broadcasting rules) ----

    def __add__(self, other):
        other = self._coerce(other)
        out_val = self.value + other.value

        def back(g):
            self._accumulate(_unbroadcast(g, self.value.shape))
            other._accumulate(_unbroadcast(g, other.value.shape))

        return Var(self.tape, out_val, parents=(self, other), backward=back)

    __radd__ = __add__

    def __neg__(self):
        def back(g):
            self._accumulate(-g)

        return Var(self.tape, -self.value, parents=(self,), backward=back)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self.value, other.value

        def back(g):
            self._accumulate(_unbroadcast(g * b, a.shape))
            other._accumulate(_unbroadcast(g * a, b.shape))

        return Var(self.tape, a * b, parents=(self, other), backward=back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self.value, other.value
        out_val = a / b

        def back(g):
            self._accumulate(_unbroadcast(g / b, a.shape))
            other._accumulate(_unbroadcast(-g * out_val / b, b.shape))

        return Var(self.tape, out_val, parents=(self, other), backward=back)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar powers are supported")
        a = self.value

        def back(g):
            self._accumulate(g * exponent * a ** (exponent - 1))

        return Var(self.tape, a ** exponent, parents=(self,), backward=back)

    # ---- elementwise functions ----

    def tanh(self):
        out_val = np.tanh(self.value)

        def back(g):
            self._accumulate(g * (1.0 - out_val * out_val))

        return Var(self.tape, out_val, parents=(self,), backward=back)

    def sin(self):
        a = self.value

        def back(g):
            self._accumulate(g * np.cos(a))

        return Var(self.tape, np.sin(a), parents=(self,), backward=back)

    def cos(self):
        a = self.value

        def back(g):
            self._accumulate(-g * np.sin(a))

        return Var(self.tape, np.cos(a), parents=(self,), backward=back)

    def sqrt(self):
        out_val = np.sqrt(self.value)

        def back(g):
            self._accumulate(g * 0.5 / out_val)

        return Var(self.tape, out_val, parents=(self,), backward=back)

    def relu(self):
        mask = (self.value > 0).astype(self.value.dtype)

        def back(g):
            self._accumulate(g * mask)

        return Var(self.tape, self.value * mask, parents=(self,), backward=back)

    # ---- shape ops ----

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.value.shape

        def back(g):
            self._accumulate(g.reshape(orig))

        return Var(self.tape, self.value.reshape(shape), parents=(self,), backward=back)

    def transpose(self):
        if self.value.ndim != 2:
            raise ValueError(f"transpose expects a 2-D value, got {self.value.shape}")

        def back(g):
            self._accumulate(g.T)

        return Var(self.tape, self.value.T.copy(), parents=(self,), backward=back)

    def narrow(self, axis: int, start: int, length: int):
        index = [slice(None)] * self.value.ndim
        index[axis] = slice(start, start + length)
        index = tuple(index)

        def back(g):
            full = np.zeros_like(self.value)
            full[index] = g
            self._accumulate(full)

        return Var(self.tape, self.value[index].copy(), parents=(self,), backward=back)

    # ---- reductions ----

    def sum(self, axis=None):
        a = self.value

        def back(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, a.shape).astype(a.dtype, copy=False))
            else:
                self._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape)
                                 .astype(a.dtype, copy=False))

        return Var(self.tape, a.sum(axis=axis), parents=(self,), backward=back)

    def mean(self, axis=None):
        a = self.value
        count = a.size if axis is None else a.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)

    # ---- linear algebra ----

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self.value, other.value
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

        def back(g):
            self._accumulate(g @ b.T)
            other._accumulate(a.T @ g)

        return Var(self.tape, a @ b, parents=(self, other), backward=back)

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Var(shape={self.value.shape}, dtype={self.value.dtype}{tag})"


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---- module-level functional forms (these double as the ops namespace the
# activation formulas are written against) ----

def value(v):
    return v.value if isinstance(v, Var) else np.asarray(v)


def sqrt(v: Var) -> Var:
    return v.sqrt()


def tanh(v: Var) -> Var:
    return v.tanh()


def sin(v: Var) -> Var:
    return v.sin()


def cos(v: Var) -> Var:
    return v.cos()


def relu(v: Var) -> Var:
    return v.relu()


def atan2(y: Var, x: Var) -> Var:
    x = y._coerce(x)
    yv, xv = y.value, x.value
    denom = xv * xv + yv * yv

    def back(g):
        y._accumulate(g * xv / denom)
        x._accumulate(-g * yv / denom)

    return Var(y.tape, np.arctan2(yv, xv), parents=(y, x), backward=back)


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    parts = list(parts)
    tape = parts[0].tape
    sizes = [p.value.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            p._accumulate(g[tuple(index)])

    out_val = np.concatenate([p.value for p in parts], axis=axis)
    return Var(tape, out_val, parents=tuple(parts), backward=back)


def conv2d(x: Var, k: Var) -> Var:
    """Same-size 2D cross-correlation: x [B,C,H,W] with kernel [O,C,kh,kw]."""
    k = x._coerce(k)
    xv, kv = x.value, k.value
    out_val = _backend.conv2d_forward(xv, kv)
    kh, kw = kv.shape[2], kv.shape[3]

    def back(g):
        if x._needs:
            x._accumulate(_backend.conv2d_grad_input(g, kv))
        if k._needs:
            k._accumulate(_backend.conv2d_grad_kernel(g, xv, kh, kw))

    return Var(x.tape, out_val, parents=(x, k), backward=back)


def avgpool2d(x: Var, win: int) -> Var:
    """Windowed mean over non-overlapping win x win patches."""
    out_val = _backend.avgpool2d_forward(x.value, win)

    def back(g):
        x._accumulate(_backend.avgpool2d_grad(g, win))

    return Var(x.tape, out_val, parents=(x,), backward=back)


def quaternion_activation(x: Var, kind, conv, norm_eps_denom: bool = False) -> Var:
    """Fused quaternion activation on a packed [B, 4C, ...] variable.

    Channel axis 1 holds the four component groups in w, x, y, z order.
    """
    xv = x.value
    c4 = xv.shape[1]
    if c4 % 4:
        raise ValueError(f"packed channel count must be divisible by 4, got {c4}")
    c = c4 // 4
    planes = tuple(xv[:, i * c:(i + 1) * c] for i in range(4))
    eps = eps_for(xv.dtype)
    out, vjp = _act.activation_with_vjp(kind, conv, *planes, eps=eps,
                                        norm_eps_denom=norm_eps_denom)
    out_val = np.concatenate(out, axis=1)

    def back(g):
        grads = vjp(*(g[:, i * c:(i + 1) * c] for i in range(4)))
        x._accumulate(np.concatenate(grads, axis=1))

    return Var(x.tape, out_val, parents=(x,), backward=back)


def softmax_cross_entropy(logits: Var, labels: np.ndarray) -> Var:
    """Mean softmax cross-entropy of [B, K] logits against integer labels."""
    lv = logits.value
    if lv.ndim != 2:
        raise ValueError(f"logits must be [batch, classes], got {lv.shape}")
    labels = np.asarray(labels)
    if labels.shape != (lv.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match batch {lv.shape[0]}")
    shifted = lv - lv.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    batch = lv.shape[0]
    nll = -(shifted[np.arange(batch), labels]
            - np.log(exp.sum(axis=1)))
    loss_val = np.asarray(nll.mean(), dtype=lv.dtype)

    def back(g):
        grad = probs.copy()
        grad[np.arange(batch), labels] -= 1.0
        logits._accumulate((g * grad / batch).astype(lv.dtype, copy=False))

    return Var(logits.tape, loss_val, parents=(logits,), backward=back)


def backward(tape: Tape, loss: Var) -> Dict[Var, np.ndarray]:
    return tape.backward(loss)
