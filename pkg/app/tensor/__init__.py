from app.tensor.core import Tensor, as_tensor, backward, is_grad_enabled, no_grad
from app.tensor.gradcheck import grad_check
from app.tensor.nn import (
    conv2d,
    drop_path,
    dropout,
    gelu,
    layer_norm,
    maxpool2d,
    multi_head_attention,
    relu,
    sequence_pool,
    sigmoid,
    softmax,
)
from app.tensor.ops import dense

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "conv2d",
    "dense",
    "drop_path",
    "dropout",
    "gelu",
    "grad_check",
    "is_grad_enabled",
    "layer_norm",
    "maxpool2d",
    "multi_head_attention",
    "no_grad",
    "relu",
    "sequence_pool",
    "sigmoid",
    "softmax",
]
