from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Optional, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from app.config import config
from app.exceptions import ConfigError
from app.models.base import BaseClassifier
from app.models.cat import CatModel
from app.models.cnn import CnnModel
from app.models.config import CatConfig, CnnConfig, MlpConfig
from app.models.mlp import MlpModel
from app.schema import ArchKind
from app.tensor import Tensor, no_grad
from app.tensor.random import STREAM_INIT, ensure_rng

MODEL_CLASSES: Dict[ArchKind, Type[BaseClassifier]] = {
    ArchKind.CAT: CatModel,
    ArchKind.CNN: CnnModel,
    ArchKind.MLP: MlpModel,
}

CONFIG_CLASSES: Dict[ArchKind, Type[BaseModel]] = {
    ArchKind.CAT: CatConfig,
    ArchKind.CNN: CnnConfig,
    ArchKind.MLP: MlpConfig,
}

ModelConfig = Union[CatConfig, CnnConfig, MlpConfig]


def model_config_for(arch: Union[ArchKind, str], overrides: Optional[Dict[str, Any]] = None) -> ModelConfig:
    arch = ArchKind(arch)
    try:
        return CONFIG_CLASSES[arch](**(overrides or {}))
    except ValidationError as e:
        raise ConfigError(f"invalid {arch.value} config: {e}") from e


def build_model(
    arch: Union[ArchKind, str],
    cfg: Optional[Union[ModelConfig, Dict[str, Any]]] = None,
    seed: Union[int, np.random.Generator] = 0,
    dtype=np.float32,
) -> BaseClassifier:
    """Instantiate a freshly initialized classifier of the given architecture."""
    arch = ArchKind(arch)
    if cfg is None or isinstance(cfg, dict):
        cfg = model_config_for(arch, cfg)
    elif not isinstance(cfg, CONFIG_CLASSES[arch]):
        raise ConfigError(f"{type(cfg).__name__} does not configure a {arch.value} model")
    model_cls = MODEL_CLASSES[arch]
    arrays = model_cls.init_params(cfg, ensure_rng(seed, STREAM_INIT), dtype)
    params = {name: Tensor(value, requires_grad=True, dtype=dtype, name=name) for name, value in arrays.items()}
    return model_cls(cfg=cfg, params=params)


class Prediction(BaseModel):
    """Stacked inference results as plain arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    logits: np.ndarray
    probabilities: np.ndarray
    latent: np.ndarray

    def __len__(self) -> int:
        return int(self.probabilities.shape[0])


def _predict_chunk(model: BaseClassifier, chunk: np.ndarray):
    with no_grad():
        out = model.forward(chunk, training=False)
    return out.logits.data, out.probabilities.data, out.latent.data


def predict(
    model: BaseClassifier,
    x: np.ndarray,
    batch_size: int = 32,
    threads: Optional[int] = None,
) -> Prediction:
    """Batched inference over an [n, side, side] (or flattened) array.

    Chunks run on a thread pool; results are stacked in input order.
    """
    x = np.asarray(x)
    if batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {batch_size}")
    if len(x) == 0:
        empty = np.zeros((0, model.num_classes), dtype=model.dtype)
        return Prediction(logits=empty, probabilities=empty.copy(), latent=np.zeros((0, 0), dtype=model.dtype))
    chunks = [x[i : i + batch_size] for i in range(0, len(x), batch_size)]
    workers = threads or config.runtime.worker_threads
    if workers <= 1 or len(chunks) == 1:
        parts = [_predict_chunk(model, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _predict_chunk(model, c), chunks))
    logits, probs, latent = (np.concatenate(p) for p in zip(*parts))
    return Prediction(logits=logits, probabilities=probs, latent=latent)
