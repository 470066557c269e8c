"""Small CNN baseline: two conv/pool stages and two dense layers."""

from typing import Dict, Mapping, Optional

import numpy as np

from app.models.base import BaseClassifier, ModelInput, ModelOutput, as_image_batch, glorot_uniform, he_normal
from app.models.config import CnnConfig
from app.schema import ArchKind
from app.tensor import Tensor, ops
from app.tensor.nn import conv2d, dropout, maxpool2d, relu, softmax
from app.tensor.random import STREAM_DROPOUT, philox


def init_cnn_params(cfg: CnnConfig, rng: np.random.Generator, dtype=np.float32) -> Dict[str, np.ndarray]:
    c0, c1 = cfg.conv_channels
    p = {
        "conv1.w": he_normal(rng, (c0, 1, 3, 3), fan_in=9),
        "conv1.b": np.zeros(c0),
        "conv2.w": he_normal(rng, (c1, c0, 3, 3), fan_in=9 * c0),
        "conv2.b": np.zeros(c1),
        "fc.w": glorot_uniform(rng, cfg.flat_features, cfg.dense_units),
        "fc.b": np.zeros(cfg.dense_units),
        "head.w": glorot_uniform(rng, cfg.dense_units, cfg.num_classes),
        "head.b": np.zeros(cfg.num_classes),
    }
    return {name: value.astype(dtype) for name, value in p.items()}


def cnn_forward(
    x: ModelInput,
    cfg: CnnConfig,
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
    h = dropout(h, cfg.conv_dropout, training, rng)
    h = ops.reshape(h, (b, cfg.flat_features))
    latent = relu(ops.dense(h, params["fc.w"], params["fc.b"]))
    h = dropout(latent, cfg.dense_dropout, training, rng)
    logits = ops.dense(h, params["head.w"], params["head.b"])
    return ModelOutput(logits=logits, probabilities=softmax(logits, axis=-1), latent=latent)


class CnnModel(BaseClassifier):
    arch: ArchKind = ArchKind.CNN
    cfg: CnnConfig

    @classmethod
    def init_params(cls, cfg: CnnConfig, rng: np.random.Generator, dtype=np.float32):
        return init_cnn_params(cfg, rng, dtype)

    def forward(self, x: ModelInput, training: bool = False, rng=None) -> ModelOutput:
        return cnn_forward(x, self.cfg, self.params, training=training, rng=rng)
