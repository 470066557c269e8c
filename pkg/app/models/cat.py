"""Compact attribution transformer.

A two-stage convolutional tokenizer turns the spectrogram into a grid of
embedded tokens, pre-norm transformer blocks mix them, and sequence pooling
collapses the tokens into the latent vector that feeds the softmax head.
"""

from typing import Dict, Mapping, Optional

import numpy as np

from app.models.base import BaseClassifier, ModelInput, ModelOutput, as_image_batch, he_normal, trunc_normal
from app.models.config import CatConfig
from app.schema import ArchKind
from app.tensor import Tensor, ops
from app.tensor.nn import (
    ATTENTION_KEYS,
    conv2d,
    drop_path,
    dropout,
    gelu,
    layer_norm,
    maxpool2d,
    multi_head_attention,
    relu,
    sequence_pool,
    softmax,
)
from app.tensor.random import STREAM_DROPOUT, philox


def param_count(cfg: CatConfig) -> int:
    """Trainable scalars of a CAT built from ``cfg``."""
    c0, c1 = cfg.conv_channels
    d, h, n = cfg.embed_dim, cfg.mlp_hidden, cfg.num_classes
    total = (9 * c0 + c0) + (9 * c0 * c1 + c1)
    if c1 != d:
        total += c1 * d + d
    total += cfg.num_tokens * d
    per_block = 2 * d + 4 * (d * d + d) + 2 * d + (d * h + h) + (h * d + d)
    total += cfg.num_layers * per_block
    total += 2 * d + d + (d * n + n)
    return total


def drop_path_schedule(cfg: CatConfig) -> np.ndarray:
    """Stochastic depth grows linearly from 0 at the first block to drop_path_rate at the last."""
    if cfg.num_layers == 1:
        return np.array([cfg.drop_path_rate])
    return np.linspace(0.0, cfg.drop_path_rate, cfg.num_layers)


def init_cat_params(cfg: CatConfig, rng: np.random.Generator, dtype=np.float32) -> Dict[str, np.ndarray]:
    c0, c1 = cfg.conv_channels
    d, h = cfg.embed_dim, cfg.mlp_hidden
    p: Dict[str, np.ndarray] = {
        "conv1.w": he_normal(rng, (c0, 1, 3, 3), fan_in=9),
        "conv1.b": np.zeros(c0),
        "conv2.w": he_normal(rng, (c1, c0, 3, 3), fan_in=9 * c0),
        "conv2.b": np.zeros(c1),
    }
    if c1 != d:
        p["proj.w"] = trunc_normal(rng, (c1, d))
        p["proj.b"] = np.zeros(d)
    p["pos_embed"] = trunc_normal(rng, (cfg.num_tokens, d))
    for i in range(cfg.num_layers):
        prefix = f"blocks.{i}"
        p[f"{prefix}.ln1.g"] = np.ones(d)
        p[f"{prefix}.ln1.b"] = np.zeros(d)
        for key in ATTENTION_KEYS:
            shape = (d, d) if key.startswith("w") else (d,)
            p[f"{prefix}.attn.{key}"] = trunc_normal(rng, shape) if key.startswith("w") else np.zeros(shape)
        p[f"{prefix}.ln2.g"] = np.ones(d)
        p[f"{prefix}.ln2.b"] = np.zeros(d)
        p[f"{prefix}.fc1.w"] = trunc_normal(rng, (d, h))
        p[f"{prefix}.fc1.b"] = np.zeros(h)
        p[f"{prefix}.fc2.w"] = trunc_normal(rng, (h, d))
        p[f"{prefix}.fc2.b"] = np.zeros(d)
    p["norm.g"] = np.ones(d)
    p["norm.b"] = np.zeros(d)
    p["pool.u"] = trunc_normal(rng, (d, 1))
    p["head.w"] = trunc_normal(rng, (d, cfg.num_classes))
    p["head.b"] = np.zeros(cfg.num_classes)
    return {name: value.astype(dtype) for name, value in p.items()}


def _block(
    x: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
    cfg: CatConfig,
    path_rate: float,
    training: bool,
    rng: np.random.Generator,
) -> Tensor:
    h = layer_norm(x, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
    attn = {key: params[f"{prefix}.attn.{key}"] for key in ATTENTION_KEYS}
    h = multi_head_attention(h, attn, heads=cfg.num_heads)
    x = ops.add(x, drop_path(h, path_rate, training, rng))

    h = layer_norm(x, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])
    h = gelu(ops.dense(h, params[f"{prefix}.fc1.w"], params[f"{prefix}.fc1.b"]))
    h = dropout(h, cfg.dropout, training, rng)
    h = ops.dense(h, params[f"{prefix}.fc2.w"], params[f"{prefix}.fc2.b"])
    h = dropout(h, cfg.dropout, training, rng)
    return ops.add(x, drop_path(h, path_rate, training, rng))


def cat_forward(
    x: ModelInput,
    cfg: CatConfig,
    params: Mapping[str, Tensor],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ModelOutput:
    if training and rng is None:
        rng = philox(0, STREAM_DROPOUT)
    img = as_image_batch(x, cfg.input_size, params["conv1.w"].dtype)
    b = img.shape[0]

    h = maxpool2d(relu(conv2d(img, params["conv1.w"], params["conv1.b"])))
    h = maxpool2d(relu(conv2d(h, params["conv2.w"], params["conv2.b"])))
    channels = h.shape[1]
    tokens = ops.transpose(ops.reshape(h, (b, channels, cfg.num_tokens)), (0, 2, 1))
    if "proj.w" in params:
        tokens = ops.dense(tokens, params["proj.w"], params["proj.b"])

    z = dropout(ops.add(tokens, params["pos_embed"]), cfg.dropout, training, rng)
    for i, rate in enumerate(drop_path_schedule(cfg)):
        z = _block(z, params, f"blocks.{i}", cfg, float(rate), training, rng)
    z = layer_norm(z, params["norm.g"], params["norm.b"])

    latent = sequence_pool(z, params["pool.u"])
    logits = ops.dense(latent, params["head.w"], params["head.b"])
    return ModelOutput(logits=logits, probabilities=softmax(logits, axis=-1), latent=latent)


class CatModel(BaseClassifier):
    arch: ArchKind = ArchKind.CAT
    cfg: CatConfig

    @classmethod
    def init_params(cls, cfg: CatConfig, rng: np.random.Generator, dtype=np.float32):
        return init_cat_params(cfg, rng, dtype)

    def forward(self, x: ModelInput, training: bool = False, rng=None) -> ModelOutput:
        return cat_forward(x, self.cfg, self.params, training=training, rng=rng)
