"""Minimal reverse-mode differentiation over numpy arrays.

Covers exactly the operation set the denoising network is built from: affine
maps, pointwise SiLU, (broadcast) addition, and masked mean-squared error.
Not a general tensor framework; every op records its vector-Jacobian products
and ``backward`` walks the tape once.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "parents", "vjps", "requires_grad", "grad")

    def __init__(self, value, parents=(), vjps=(), requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjps = vjps
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad = None


def leaf(value, requires_grad: bool = False) -> Node:
    return Node(value, requires_grad=requires_grad)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad over axes that were broadcast to reach its shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a: Node, b: Node) -> Node:
    value = a.value + b.value
    return Node(
        value,
        parents=(a, b),
        vjps=(
            lambda g: _unbroadcast(g, a.value.shape),
            lambda g: _unbroadcast(g, b.value.shape),
        ),
    )


def affine(x: Node, w: Node, b: Node | None = None) -> Node:
    """x @ w (+ b); x is (batch, in), w is (in, out), b is (out,)."""
    value = x.value @ w.value
    if b is not None:
        value = value + b.value
    parents = (x, w) if b is None else (x, w, b)
    vjps = [
        lambda g: g @ w.value.T,
        lambda g: x.value.T @ g,
    ]
    if b is not None:
        vjps.append(lambda g: _unbroadcast(g, b.value.shape))
    return Node(value, parents=parents, vjps=tuple(vjps))


def silu(x: Node) -> Node:
    sig = expit(x.value)
    value = x.value * sig
    # derivative built lazily; inference never pays for it
    return Node(
        value,
        parents=(x,),
        vjps=(lambda g: g * (sig * (1.0 + x.value * (1.0 - sig))),),
    )


def masked_mse(pred: Node, target: np.ndarray, mask: np.ndarray) -> Node:
    """Mean of (pred - target)^2 over batch rows and masked columns.

    ``mask`` is a boolean vector over columns; unmasked columns contribute
    nothing to the loss or the gradient.
    """
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n_active = pred.value.shape[0] * int(mask.sum())
    if n_active == 0:
        raise ValueError("masked_mse needs at least one active coordinate")
    diff = (pred.value - target) * mask
    value = float(np.sum(diff * diff) / n_active)
    return Node(value, parents=(pred,), vjps=(lambda g: g * (2.0 / n_active) * diff,))


def backward(root: Node) -> None:
    """Accumulate gradients of ``root`` (a scalar) into every reachable node."""
    if root.value.ndim != 0 and root.value.size != 1:
        raise ValueError("backward expects a scalar root")
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            if not parent.requires_grad:
                continue
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib
