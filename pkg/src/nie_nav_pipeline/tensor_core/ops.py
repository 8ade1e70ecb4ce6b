"""
Differentiable primitive ops.

Every op takes `Tensor` (or array-like constant) operands, returns a new `Tensor` and records a `Context` whose
backward maps the output gradient to one gradient per parent. Elementwise binary ops follow NumPy broadcasting and
reduce their gradients back to each operand's shape.
"""
from collections.abc import Sequence

import numpy as np

from nie_nav_pipeline.tensor_core.tensor import Context, ShapeError, Tensor

MASK_FILL = -1e9


def _lift(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _make(op: str, data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    if not any(p.requires_grad or p.ctx is not None for p in parents):
        return Tensor(data)
    return Tensor(data, ctx=Context(op=op, parents=parents, backward=backward))


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------------------------------------------------
def add(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("add", a, b)
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("sub", a, b)
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("mul", a, b)
    return _make("mul", a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(x: Tensor) -> Tensor:
    return _make("neg", -x.data, (x,), lambda g: (-g,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make("relu", np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _make("tanh", out, (x,), lambda g: (g * (1 - out * out),))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1 + np.tanh(0.5 * x.data))
    return _make("sigmoid", out, (x,), lambda g: (g * out * (1 - out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return _make("exp", out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return _make("log", np.log(x.data), (x,), lambda g: (g / x.data,))


def abs(x: Tensor) -> Tensor:  # noqa: A001
    return _make("abs", np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def square(x: Tensor) -> Tensor:
    return _make("square", x.data * x.data, (x,), lambda g: (2 * g * x.data,))


def clip(x: Tensor, low: float, high: float) -> Tensor:
    inside = (x.data >= low) & (x.data <= high)
    return _make("clip", np.clip(x.data, low, high), (x,), lambda g: (g * inside,))


def minimum(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("minimum", a, b)
    take_a = a.data <= b.data
    return _make("minimum", np.minimum(a.data, b.data), (a, b),
                 lambda g: (_unbroadcast(g * take_a, a.shape), _unbroadcast(g * ~take_a, b.shape)))


# ---------------------------------------------------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------------------------------------------------
def matmul(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:  # noqa: PLR2004
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch dimensions do not broadcast") from None

    def backward(g):
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _make("matmul", a.data @ b.data, (a, b), backward)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation on NCHW input with OIkk weights, implemented as im2col + matmul.
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1] or weight.shape[2] != weight.shape[3]:  # noqa: PLR2004
        raise ShapeError("conv2d", x.shape, weight.shape)
    n, c, h, w = x.shape
    o, _, k, _ = weight.shape
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (w + 2 * padding - k) // stride + 1
    if h_out <= 0 or w_out <= 0:
        raise ShapeError("conv2d", x.shape, weight.shape, detail="kernel larger than padded input")

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(2, 3))
    windows = windows[:, :, : stride * (h_out - 1) + 1: stride, : stride * (w_out - 1) + 1: stride]
    # (n, h_out, w_out, c, k, k) -> rows of patches
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h_out * w_out, c * k * k)
    w_mat = weight.data.reshape(o, c * k * k)
    out = (cols @ w_mat.T).reshape(n, h_out, w_out, o).transpose(0, 3, 1, 2)
    parents: tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        if bias.shape != (o,):
            raise ShapeError("conv2d", weight.shape, bias.shape, detail="bias must have one entry per filter")
        out = out + bias.data[None, :, None, None]
        parents = (x, weight, bias)

    def backward(g):
        g_rows = g.transpose(0, 2, 3, 1).reshape(n * h_out * w_out, o)
        grad_w = (g_rows.T @ cols).reshape(weight.shape)
        grad_cols = (g_rows @ w_mat).reshape(n, h_out, w_out, c, k, k)
        grad_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                grad_padded[:, :, i: i + stride * h_out: stride, j: j + stride * w_out: stride] += \
                    grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, padding: padding + h, padding: padding + w]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return _make("conv2d", np.ascontiguousarray(out), parents, backward)


# ---------------------------------------------------------------------------------------------------------------------
# Normalisation and reductions
# ---------------------------------------------------------------------------------------------------------------------
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make("softmax", out, (x,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - log_norm
    probs = np.exp(out)
    return _make("log_softmax", out, (x,), lambda g: (g - probs * g.sum(axis=axis, keepdims=True),))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make("sum", np.asarray(out), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------------------------------------------------
# Shape manipulation and indexing
# ---------------------------------------------------------------------------------------------------------------------
def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return _make("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", x.shape, shape) from None
    return _make("broadcast_to", np.ascontiguousarray(out), (x,), lambda g: (_unbroadcast(g, x.shape),))


def transpose(x: Tensor, axis1: int = -1, axis2: int = -2) -> Tensor:
    return _make("transpose", np.swapaxes(x.data, axis1, axis2), (x,),
                 lambda g: (np.swapaxes(g, axis1, axis2),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    reference = tensors[0].shape
    norm_axis = axis % len(reference)
    for t in tensors[1:]:
        if len(t.shape) != len(reference) or any(
                s != r for i, (s, r) in enumerate(zip(t.shape, reference, strict=True)) if i != norm_axis):
            raise ShapeError("concat", *(u.shape for u in tensors), detail=f"axis={axis}")
    sizes = [t.shape[norm_axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    return _make("concat", np.concatenate([t.data for t in tensors], axis=norm_axis), tuple(tensors),
                 lambda g: tuple(np.split(g, bounds, axis=norm_axis)))


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    norm_axis = axis % x.ndim
    if start < 0 or start + length > x.shape[norm_axis]:
        raise ShapeError("narrow", x.shape, detail=f"slice [{start}:{start + length}] on axis {axis}")
    index = [slice(None)] * x.ndim
    index[norm_axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        grad = np.zeros_like(x.data)
        grad[index] = g
        return (grad,)

    return _make("narrow", x.data[index], (x,), backward)


def select(x: Tensor, indices, axis: int) -> Tensor:
    """
    Picks one entry along `axis` for every leading position: `indices` has shape `x.shape[:axis]`.
    """
    indices = np.asarray(indices, dtype=np.int64)
    norm_axis = axis % x.ndim
    if indices.shape != x.shape[:norm_axis]:
        raise ShapeError("select", x.shape, indices.shape, detail=f"indices must match leading dims before axis {axis}")
    expanded = indices.reshape(indices.shape + (1,) * (x.ndim - norm_axis))
    out = np.take_along_axis(x.data, expanded, axis=norm_axis)

    def backward(g):
        grad = np.zeros_like(x.data)
        np.put_along_axis(grad, expanded, np.expand_dims(g, norm_axis), axis=norm_axis)
        return (grad,)

    return _make("select", np.squeeze(out, axis=norm_axis), (x,), backward)


def embedding(table: Tensor, indices) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:  # noqa: PLR2004
        raise ShapeError("embedding", table.shape, indices.shape, detail="table must be 2-D")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError("embedding", table.shape, indices.shape, detail="index out of range")

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, indices.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return _make("embedding", table.data[indices], (table,), backward)


# ---------------------------------------------------------------------------------------------------------------------
# Composite cells
# ---------------------------------------------------------------------------------------------------------------------
def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def gru_cell(x: Tensor, h: Tensor, w_ih: Tensor, w_hh: Tensor, b_ih: Tensor, b_hh: Tensor) -> Tensor:
    """
    One gated-recurrent step; gate order in the packed weights is (reset, update, candidate).
    """
    hidden = h.shape[-1]
    if w_ih.shape[-1] != 3 * hidden or w_hh.shape != (hidden, 3 * hidden):
        raise ShapeError("gru_cell", x.shape, h.shape, w_ih.shape, w_hh.shape)
    gi = linear(x, w_ih, b_ih)
    gh = linear(h, w_hh, b_hh)
    reset = sigmoid(add(narrow(gi, -1, 0, hidden), narrow(gh, -1, 0, hidden)))
    update = sigmoid(add(narrow(gi, -1, hidden, hidden), narrow(gh, -1, hidden, hidden)))
    candidate = tanh(add(narrow(gi, -1, 2 * hidden, hidden), mul(reset, narrow(gh, -1, 2 * hidden, hidden))))
    return add(mul(sub(1.0, update), candidate), mul(update, h))


def attention(query: Tensor, key: Tensor, value: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
    """
    Scaled dot-product attention over the second-to-last axis. `key_mask` (broadcastable to the key axis, 1 keeps,
    0 drops) excludes keys from the softmax.
    """
    if query.shape[-1] != key.shape[-1] or key.shape[-2] != value.shape[-2]:
        raise ShapeError("attention", query.shape, key.shape, value.shape)
    scores = mul(matmul(query, transpose(key)), 1.0 / np.sqrt(query.shape[-1]))
    if key_mask is not None:
        keep = np.asarray(key_mask, dtype=scores.dtype)[..., None, :]
        scores = add(mul(scores, keep), (1.0 - keep) * MASK_FILL)
    return matmul(softmax(scores, axis=-1), value)
