"""Fully connected baseline on the flattened spectrogram."""

from typing import Dict, Mapping

import numpy as np

from app.dsp.spectrogram import Spectrogram
from app.exceptions import ShapeError
from app.models.base import BaseClassifier, ModelInput, ModelOutput, glorot_uniform
from app.models.config import MlpConfig
from app.schema import ArchKind
from app.tensor import Tensor, ops
from app.tensor.nn import sigmoid, softmax


def init_mlp_params(cfg: MlpConfig, rng: np.random.Generator, dtype=np.float32) -> Dict[str, np.ndarray]:
    h1, h2 = cfg.hidden
    p = {
        "fc1.w": glorot_uniform(rng, cfg.in_features, h1),
        "fc1.b": np.zeros(h1),
        "fc2.w": glorot_uniform(rng, h1, h2),
        "fc2.b": np.zeros(h2),
        "head.w": glorot_uniform(rng, h2, cfg.num_classes),
        "head.b": np.zeros(cfg.num_classes),
    }
    return {name: value.astype(dtype) for name, value in p.items()}


def as_flat_batch(x: ModelInput, in_features: int, dtype) -> Tensor:
    if isinstance(x, Spectrogram):
        x = x.pixels[None]
    elif isinstance(x, (list, tuple)) and x and isinstance(x[0], Spectrogram):
        x = np.stack([s.pixels for s in x])
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x), dtype=dtype)
    if t.ndim == 1:
        t = ops.reshape(t, (1, t.shape[0]))
    elif t.ndim > 2:
        t = ops.reshape(t, (t.shape[0], int(np.prod(t.shape[1:]))))
    if t.shape[-1] != in_features:
        raise ShapeError(f"expected {in_features} input features, got shape {t.shape}")
    return t


def mlp_forward(
    x: ModelInput, cfg: MlpConfig, params: Mapping[str, Tensor], training: bool = False, rng=None
) -> ModelOutput:
    flat = as_flat_batch(x, cfg.in_features, params["fc1.w"].dtype)
    h = sigmoid(ops.dense(flat, params["fc1.w"], params["fc1.b"]))
    latent = sigmoid(ops.dense(h, params["fc2.w"], params["fc2.b"]))
    logits = ops.dense(latent, params["head.w"], params["head.b"])
    return ModelOutput(logits=logits, probabilities=softmax(logits, axis=-1), latent=latent)


class MlpModel(BaseClassifier):
    arch: ArchKind = ArchKind.MLP
    cfg: MlpConfig

    @classmethod
    def init_params(cls, cfg: MlpConfig, rng: np.random.Generator, dtype=np.float32):
        return init_mlp_params(cfg, rng, dtype)

    def forward(self, x: ModelInput, training: bool = False, rng=None) -> ModelOutput:
        return mlp_forward(x, self.cfg, self.params, training=training, rng=rng)
