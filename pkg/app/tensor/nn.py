"""Neural-network primitives with fused analytic backward passes."""

import math
from typing import Mapping, Optional

import numpy as np
from scipy.special import erf, expit

from app.exceptions import ConfigError, ShapeError
from app.tensor import ops
from app.tensor.core import Tensor, accumulate, make_result

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

ATTENTION_KEYS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def _backward(g):
        accumulate(x, g * mask)

    return make_result(np.where(mask, x.data, 0).astype(x.dtype), (x,), _backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GeLU, x * Phi(x) with the erf-based normal CDF."""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))

    def _backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        accumulate(x, g * (cdf + x.data * pdf))

    return make_result((x.data * cdf).astype(x.dtype), (x,), _backward)


def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data).astype(x.dtype)

    def _backward(g):
        accumulate(x, g * out * (1.0 - out))

    return make_result(out, (x,), _backward)


def softmax(v: Tensor, axis: int = -1) -> Tensor:
    if v.shape[axis] < 1:
        raise ShapeError("softmax over an empty axis")
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(g):
        accumulate(v, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return make_result(out, (v,), _backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis with the population variance, then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: affine params {gain.shape}/{bias.shape} vs features {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    out = xhat * gain.data + bias.data

    def _backward(g):
        lead = tuple(range(g.ndim - 1))
        accumulate(gain, (g * xhat).sum(axis=lead))
        accumulate(bias, g.sum(axis=lead))
        dxhat = g * gain.data
        dx = rstd * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        accumulate(x, dx)

    return make_result(out.astype(x.dtype), (x, gain, bias), _backward)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation, stride 1, zero padding 1 (same-size output).

    x is [C_in, H, W] or [B, C_in, H, W]; kernel is [C_out, C_in, 3, 3].
    """
    if kernel.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise ShapeError(f"conv2d: kernel must be [C_out, C_in, 3, 3], got {kernel.shape}")
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d: input must be [C, H, W] or [B, C, H, W], got {x.shape}")
    c_out, c_in = kernel.shape[:2]
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match {c_out} output channels")
    batched = x.ndim == 4
    xd = x.data if batched else x.data[None]
    if xd.shape[1] != c_in:
        raise ShapeError(f"conv2d: input has {xd.shape[1]} channels, kernel expects {c_in}")

    _, _, h, w = xd.shape
    padded = np.pad(xd, ((0, 0), (0, 0), (1, 1), (1, 1)))
    k = kernel.data
    out = np.zeros((xd.shape[0], c_out, h, w), dtype=np.result_type(xd, k))
    for i in range(3):
        for j in range(3):
            out += np.einsum("oc,bchw->bohw", k[:, :, i, j], padded[:, :, i : i + h, j : j + w], optimize=True)
    out += bias.data[None, :, None, None]

    def _backward(g):
        g4 = g if batched else g[None]
        grad_padded = np.zeros_like(padded)
        grad_k = np.zeros_like(k)
        for i in range(3):
            for j in range(3):
                window = padded[:, :, i : i + h, j : j + w]
                grad_padded[:, :, i : i + h, j : j + w] += np.einsum(
                    "bohw,oc->bchw", g4, k[:, :, i, j], optimize=True
                )
                grad_k[:, :, i, j] = np.einsum("bohw,bchw->oc", g4, window, optimize=True)
        grad_x = grad_padded[:, :, 1:-1, 1:-1]
        accumulate(x, grad_x if batched else grad_x[0])
        accumulate(kernel, grad_k)
        accumulate(bias, g4.sum(axis=(0, 2, 3)))

    return make_result(out if batched else out[0], (x, kernel, bias), _backward)


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2) -> Tensor:
    """Non-overlapping max pooling over the last two axes; ties go to the first cell row-major."""
    if window != stride:
        raise ShapeError("maxpool2d supports non-overlapping windows only (window == stride)")
    if x.ndim < 2:
        raise ShapeError(f"maxpool2d: need at least [H, W], got {x.shape}")
    *lead, h, w = x.shape
    lead = tuple(lead)
    if h % window or w % window:
        raise ShapeError(f"maxpool2d: spatial dims {h}x{w} not divisible by {window}")
    hb, wb = h // window, w // window

    blocks = x.data.reshape(lead + (hb, window, wb, window))
    blocks = np.moveaxis(blocks, -3, -2).reshape(lead + (hb, wb, window * window))
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def _backward(g):
        grad_blocks = np.zeros_like(blocks)
        np.put_along_axis(grad_blocks, idx[..., None], g[..., None], axis=-1)
        grad_blocks = grad_blocks.reshape(lead + (hb, wb, window, window))
        grad = np.moveaxis(grad_blocks, -2, -3).reshape(lead + (h, w))
        accumulate(x, grad)

    return make_result(out, (x,), _backward)


def _keep_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def _check_rate(rate: float, what: str) -> None:
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"{what} rate must be in [0, 1), got {rate}")


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    _check_rate(rate, "dropout")
    if not training or rate == 0.0:
        return x
    return ops.mul(x, Tensor(_keep_mask(x.shape, rate, rng, x.dtype), dtype=x.dtype))


def drop_path(
    x: Tensor,
    rate: float,
    training: bool,
    rng: Optional[np.random.Generator],
    per_sample: Optional[bool] = None,
) -> Tensor:
    """Stochastic depth on a residual branch.

    Zeroes the whole branch with probability ``rate`` and rescales survivors by
    1/(1-rate). Batched inputs ([B, n, d]) draw one decision per sample.
    """
    _check_rate(rate, "drop_path")
    if not training or rate == 0.0:
        return x
    if per_sample is None:
        per_sample = x.ndim >= 3
    shape = (x.shape[0],) + (1,) * (x.ndim - 1) if per_sample else (1,) * x.ndim
    return ops.mul(x, Tensor(_keep_mask(shape, rate, rng, x.dtype), dtype=x.dtype))


def multi_head_attention(X: Tensor, params: Mapping[str, Tensor], heads: int = 2) -> Tensor:
    """Scaled dot-product self-attention over the token axis of [n, d] or [B, n, d]."""
    d = X.shape[-1]
    if heads < 1 or d % heads:
        raise ConfigError(f"embedding dim {d} is not divisible by {heads} heads")
    missing = [key for key in ATTENTION_KEYS if key not in params]
    if missing:
        raise ShapeError(f"attention params missing {missing}")
    batched = X.ndim == 3
    x3 = X if batched else ops.reshape(X, (1,) + X.shape)
    b, n, _ = x3.shape
    head_dim = d // heads

    def split_heads(t: Tensor) -> Tensor:
        return ops.transpose(ops.reshape(t, (b, n, heads, head_dim)), (0, 2, 1, 3))

    q = split_heads(ops.dense(x3, params["wq"], params["bq"]))
    k = split_heads(ops.dense(x3, params["wk"], params["bk"]))
    v = split_heads(ops.dense(x3, params["wv"], params["bv"]))

    q = ops.mul(q, 1.0 / math.sqrt(head_dim))
    weights = softmax(ops.matmul(q, ops.swap_last(k)), axis=-1)
    context = ops.matmul(weights, v)
    context = ops.reshape(ops.transpose(context, (0, 2, 1, 3)), (b, n, d))
    out = ops.dense(context, params["wo"], params["bo"])
    return out if batched else ops.reshape(out, (n, d))


def sequence_pool(X: Tensor, u: Tensor) -> Tensor:
    """Attention-weighted average of tokens: a = softmax(Xu) over tokens, out = a^T X."""
    d = X.shape[-1]
    if u.shape != (d, 1):
        raise ShapeError(f"sequence_pool: u must be [{d}, 1], got {u.shape}")
    batched = X.ndim == 3
    x3 = X if batched else ops.reshape(X, (1,) + X.shape)
    if x3.shape[1] < 1:
        raise ShapeError("sequence_pool needs at least one token")
    weights = softmax(ops.matmul(x3, u), axis=1)
    pooled = ops.matmul(ops.swap_last(weights), x3)
    b = x3.shape[0]
    return ops.reshape(pooled, (b, d)) if batched else ops.reshape(pooled, (d,))
