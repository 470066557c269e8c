"""Elementwise, reduction and linear-algebra primitives."""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.exceptions import ShapeError
from app.tensor.core import ArrayLike, Tensor, accumulate, as_tensor, make_result

Axis = Optional[Union[int, Tuple[int, ...]]]


def _lift(a: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(a, Tensor):
        return a
    dtype = like.dtype if like is not None else None
    return as_tensor(np.asarray(a), dtype=dtype)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)

    def _backward(g):
        accumulate(a, g)
        accumulate(b, g)

    return make_result(a.data + b.data, (a, b), _backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)

    def _backward(g):
        accumulate(a, g)
        accumulate(b, -g)

    return make_result(a.data - b.data, (a, b), _backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)

    def _backward(g):
        accumulate(a, g * b.data)
        accumulate(b, g * a.data)

    return make_result(a.data * b.data, (a, b), _backward)


def div(a: Tensor, divisor: float) -> Tensor:
    """Division by a constant."""
    return mul(a, 1.0 / float(divisor))


def neg(a: Tensor) -> Tensor:
    def _backward(g):
        accumulate(a, -g)

    return make_result(-a.data, (a,), _backward)


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    out = np.power(a.data, exponent)

    def _backward(g):
        if exponent == 0.0:
            return
        with np.errstate(divide="ignore", invalid="ignore"):
            local = exponent * np.power(a.data, exponent - 1.0)
        # x^k with k < 1 has an unbounded slope at 0; treat it as flat there
        local = np.where(np.isfinite(local), local, 0.0).astype(a.dtype)
        accumulate(a, g * local)

    return make_result(out, (a,), _backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def _backward(g):
        accumulate(a, g * out)

    return make_result(out, (a,), _backward)


def log(a: Tensor) -> Tensor:
    def _backward(g):
        accumulate(a, g / a.data)

    return make_result(np.log(a.data), (a,), _backward)


def clip(a: Tensor, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    """Clamp values; gradient flows only where the input was inside the range."""
    out = np.clip(a.data, low, high)

    def _backward(g):
        inside = np.ones_like(a.data, dtype=bool)
        if low is not None:
            inside &= a.data >= low
        if high is not None:
            inside &= a.data <= high
        accumulate(a, g * inside)

    return make_result(out, (a,), _backward)


def sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        accumulate(a, np.broadcast_to(g, a.shape))

    return make_result(np.asarray(out), (a,), _backward)


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return div(sum(a, axis=axis, keepdims=keepdims), count)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape

    def _backward(g):
        accumulate(a, g.reshape(original))

    return make_result(a.data.reshape(shape), (a,), _backward)


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def _backward(g):
        accumulate(a, np.transpose(g, inverse))

    return make_result(np.transpose(a.data, axes), (a,), _backward)


def swap_last(a: Tensor) -> Tensor:
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands need at least two axes; reshape vectors first")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")

    def _backward(g):
        accumulate(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        accumulate(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    return make_result(np.matmul(a.data, b.data), (a, b), _backward)


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """out = xW + b over the last axis of x."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"dense: input {x.shape} does not match weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"dense: bias {bias.shape} does not match weight {weight.shape}")
    lead = x.shape[:-1]
    flat = x.data.reshape(-1, weight.shape[0])
    out = flat @ weight.data
    if bias is not None:
        out = out + bias.data

    def _backward(g):
        g2 = g.reshape(-1, weight.shape[1])
        accumulate(x, (g2 @ weight.data.T).reshape(x.shape))
        accumulate(weight, flat.T @ g2)
        if bias is not None:
            accumulate(bias, g2.sum(axis=0))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out.reshape(lead + (weight.shape[1],)), parents, _backward)


def pick(a: Tensor, index: Union[np.ndarray, Sequence[int]]) -> Tensor:
    """Select a[..., index[i]] for each row i of a 2-D tensor."""
    index = np.asarray(index, dtype=np.int64)
    if a.ndim != 2 or index.shape != (a.shape[0],):
        raise ShapeError(f"pick: expected [B, N] and [B] indices, got {a.shape} and {index.shape}")
    rows = np.arange(a.shape[0])

    def _backward(g):
        full = np.zeros_like(a.data)
        full[rows, index] = g
        accumulate(a, full)

    return make_result(a.data[rows, index], (a,), _backward)
