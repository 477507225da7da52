"""Small reverse-mode autodiff over numpy arrays.

Only the operations the set classifier needs exist: affine maps over the last
axis, ReLU, max-pooling over the point axis, softmax cross-entropy and logit
selection.  Each op runs eagerly, appends a backward closure to the tape, and
:meth:`Tape.backward` replays the closures in reverse order.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf."""


class ShapeError(ValueError):
    pass


class Node:
    __slots__ = ("value", "grad", "leaf", "name", "cache")

    def __init__(self, value: np.ndarray, leaf: bool = False, name: str | None = None):
        self.value = value
        self.grad = None
        self.leaf = leaf
        self.name = name
        self.cache = None  # op-specific values kept for backward, e.g. max-pool argmax

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:
        kind = "leaf" if self.leaf else "node"
        return f"Node({kind}, name={self.name!r}, shape={self.value.shape})"


class Tape:
    def __init__(self):
        self.ops: list[tuple[str, list[Node], Node, object]] = []
        self.leaves: list[Node] = []
        self.visited: list[int] = []

    def leaf(self, value, name: str | None = None) -> Node:
        node = Node(np.asarray(value), leaf=True, name=name)
        self.leaves.append(node)
        return node

    def record(self, op: str, inputs: list[Node], value: np.ndarray, backward) -> Node:
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"{op} produced non-finite values")
        out = Node(value, name=op)
        self.ops.append((op, inputs, out, backward))
        return out

    def backward(self, output: Node) -> dict[Node, np.ndarray]:
        """Accumulate d(output)/d(node) into ``node.grad``; returns the leaf gradients."""
        if output.value.size != 1:
            raise ShapeError(f"backward needs a scalar output, got shape {output.value.shape}")
        for node in self.leaves:
            node.grad = np.zeros_like(node.value)
        for _, inputs, out, _ in self.ops:
            out.grad = None
        output.grad = np.ones_like(output.value)
        self.visited = []
        for k in range(len(self.ops) - 1, -1, -1):
            op, inputs, out, fn = self.ops[k]
            self.visited.append(k)
            if out.grad is None:
                continue
            for node, g in zip(inputs, fn(out.grad)):
                if g is None:
                    continue
                node.grad = g if node.grad is None else node.grad + g
        return {node: node.grad for node in self.leaves}


def affine(tape: Tape, x: Node, W: Node, b: Node) -> Node:
    """``x @ W + b`` over the last axis of ``x`` (shape ``(m, d_in)`` or ``(B, m, d_in)``)."""
    xv, Wv, bv = x.value, W.value, b.value
    if Wv.ndim != 2 or bv.shape != (Wv.shape[1],) or xv.shape[-1] != Wv.shape[0]:
        raise ShapeError(f"affine shape mismatch: x {xv.shape}, W {Wv.shape}, b {bv.shape}")
    out = xv @ Wv + bv

    def backward(g):
        g2 = g.reshape(-1, Wv.shape[1])
        dx = g @ Wv.T
        dW = xv.reshape(-1, Wv.shape[0]).T @ g2
        db = g2.sum(axis=0)
        return dx, dW, db

    return tape.record("affine", [x, W, b], out, backward)


def relu(tape: Tape, x: Node) -> Node:
    xv = x.value
    mask = xv > 0
    out = np.where(mask, xv, np.zeros((), xv.dtype))

    def backward(g):
        return (np.where(mask, g, np.zeros((), g.dtype)),)

    return tape.record("relu", [x], out, backward)


def max_pool_points(tape: Tape, x: Node) -> Node:
    """Per-feature max over the point axis (axis -2); ties go to the lowest index."""
    xv = x.value
    if xv.ndim < 2 or xv.shape[-2] == 0:
        raise ShapeError("empty set")
    idx = np.argmax(xv, axis=-2)  # first occurrence on ties
    out = np.take_along_axis(xv, idx[..., None, :], axis=-2)[..., 0, :]

    def backward(g):
        dx = np.zeros_like(xv, dtype=g.dtype)
        np.put_along_axis(dx, idx[..., None, :], g[..., None, :], axis=-2)
        return (dx,)

    node = tape.record("max_pool_points", [x], out, backward)
    node.cache = idx
    return node


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_at(logits: np.ndarray, labels) -> np.ndarray:
    """``log softmax(logits)[label]`` with the max-subtraction trick and log1p for accuracy."""
    z = logits.astype(np.float64)
    top = z.argmax(axis=-1)
    shifted = z - np.take_along_axis(z, top[..., None], axis=-1)
    rest = np.exp(shifted)
    np.put_along_axis(rest, top[..., None], 0.0, axis=-1)
    lse = np.log1p(rest.sum(axis=-1))
    return np.take_along_axis(shifted, np.asarray(labels)[..., None], axis=-1)[..., 0] - lse


def softmax_cross_entropy(tape: Tape, logits: Node, labels) -> Node:
    """Mean cross-entropy; ``logits`` is ``(C,)`` with an int label or ``(B, C)`` with B labels."""
    lv = logits.value
    labels = np.asarray(labels, dtype=np.int64)
    C = lv.shape[-1]
    if labels.shape != lv.shape[:-1]:
        raise ShapeError(f"labels shape {labels.shape} does not match logits {lv.shape}")
    if np.any(labels < 0) or np.any(labels >= C):
        raise ValueError(f"label out of range 0..{C - 1}")
    batch = max(1, labels.size)
    loss = -log_softmax_at(lv, labels).sum() / batch
    out = np.asarray(loss, dtype=lv.dtype)

    def backward(g):
        d = softmax(lv)
        np.put_along_axis(d, labels[..., None], np.take_along_axis(d, labels[..., None], axis=-1) - 1.0, axis=-1)
        return ((d * (float(g) / batch)).astype(lv.dtype),)

    return tape.record("softmax_cross_entropy", [logits], out, backward)


def select(tape: Tape, logits: Node, index: int) -> Node:
    """Scalar node holding ``logits[index]`` of a ``(C,)`` vector."""
    lv = logits.value
    if lv.ndim != 1:
        raise ShapeError(f"select expects a vector, got shape {lv.shape}")
    if not 0 <= index < lv.shape[0]:
        raise ValueError(f"class index {index} out of range 0..{lv.shape[0] - 1}")

    def backward(g):
        d = np.zeros_like(lv)
        d[index] = g
        return (d,)

    return tape.record("select", [logits], np.asarray(lv[index]), backward)
