"""
Dense tensors with reverse-mode gradients.

A `Tensor` wraps a NumPy array. Tensors produced by a differentiable op carry a `Context` that records the
parent tensors and a backward function mapping the output gradient to one gradient per parent. Calling
`Tensor.backward()` on a scalar walks the recorded graph in reverse topological order and accumulates `.grad` on
every tensor that requires it.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when the operands of a primitive op have incompatible shapes."""

    def __init__(self, op: str, *shapes: tuple[int, ...], detail: str = ""):
        self.op = op
        self.shapes = shapes
        shape_text = ", ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible shapes {shape_text}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


@dataclass(frozen=True)
class Context:
    op: str
    parents: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    __array_priority__ = 100  # make ndarray <op> Tensor dispatch to Tensor

    def __init__(self, data, requires_grad: bool = False, ctx: Context | None = None, name: str | None = None):
        self.data = np.asarray(data)
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.ctx = ctx
        self.name = name
        self.grad: np.ndarray | None = None

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward", self.shape, detail="implicit seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ShapeError("backward", self.shape, grad.shape, detail="seed gradient must match output")

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node.requires_grad and node.ctx is None:
                node.grad = node_grad if node.grad is None else node.grad + node_grad
            if node.ctx is None:
                continue
            for parent, parent_grad in zip(node.ctx.parents, node.ctx.backward(node_grad), strict=True):
                if parent_grad is None or not _needs_grad(parent):
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    # Operator sugar; the primitives live in ops.py
    def __add__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by constants")
        return ops.mul(self, 1.0 / np.asarray(other, dtype=self.dtype))

    def __neg__(self):
        from nie_nav_pipeline.tensor_core import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from nie_nav_pipeline.tensor_core import ops
        return ops.matmul(self, other)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _needs_grad(tensor: Tensor) -> bool:
    return tensor.requires_grad or tensor.ctx is not None


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.ctx is not None:
            stack.extend((parent, False) for parent in node.ctx.parents if id(parent) not in visited)
    return order
