from typing import Callable

import numpy as np

from app.exceptions import InvalidArgumentError
from app.tensor.core import Tensor, backward, no_grad

DEFAULT_STEP = 1e-3


def numeric_gradient(f: Callable[[Tensor], Tensor], x: Tensor, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, one coordinate at a time."""
    base = x.data.astype(np.float64, copy=True)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up = f(Tensor(base, dtype=x.dtype)).item()
            flat[i] = original - h
            down = f(Tensor(base, dtype=x.dtype)).item()
            flat[i] = original
            grad.reshape(-1)[i] = (up - down) / (2.0 * h)
    return grad


def analytic_gradient(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    leaf = Tensor(x.data, requires_grad=True, dtype=x.dtype)
    out = f(leaf)
    if out.size != 1:
        raise InvalidArgumentError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    backward(out)
    if leaf.grad is None:
        return np.zeros(x.shape, dtype=np.float64)
    return leaf.grad.astype(np.float64)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = DEFAULT_STEP) -> float:
    """Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)."""
    analytic = analytic_gradient(f, x)
    numeric = numeric_gradient(f, x, h)
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
