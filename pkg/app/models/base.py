from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.dsp.spectrogram import Spectrogram
from app.exceptions import CheckpointError, ShapeError
from app.schema import ArchKind, ProbabilitySet
from app.tensor import Tensor, ops

ModelInput = Union[Tensor, np.ndarray, Spectrogram, Sequence[Spectrogram]]


class ModelOutput(BaseModel):
    """Batched classifier output; row b of each tensor belongs to input b."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    logits: Tensor
    probabilities: Tensor
    latent: Tensor = Field(..., description="Representation fed to the final dense layer")

    def probability_sets(self) -> List[ProbabilitySet]:
        return [ProbabilitySet.of(row) for row in self.probabilities.data.astype(np.float64)]


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    return np.clip(rng.standard_normal(shape), -2.0, 2.0) * std


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def as_image_batch(x: ModelInput, side: int, dtype) -> Tensor:
    """Coerce spectrogram input to a [B, 1, side, side] tensor."""
    if isinstance(x, Spectrogram):
        x = x.pixels[None]
    elif isinstance(x, (list, tuple)) and x and isinstance(x[0], Spectrogram):
        x = np.stack([s.pixels for s in x])
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x), dtype=dtype)
    if t.ndim == 2:
        t = ops.reshape(t, (1, 1) + t.shape)
    elif t.ndim == 3:
        t = ops.reshape(t, (t.shape[0], 1) + t.shape[1:])
    if t.ndim != 4 or t.shape[1] != 1 or t.shape[2:] != (side, side):
        raise ShapeError(f"expected {side}x{side} spectrogram input, got shape {t.shape}")
    return t


class BaseClassifier(ABC, BaseModel):
    """Named-parameter classifier; ``forward`` is a pure function of params and input."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    arch: ArchKind
    cfg: Any
    params: Dict[str, Tensor] = Field(default_factory=dict)

    @classmethod
    @abstractmethod
    def init_params(cls, cfg, rng: np.random.Generator, dtype=np.float32) -> Dict[str, np.ndarray]:
        """Fresh parameter arrays keyed by name."""

    @abstractmethod
    def forward(
        self, x: ModelInput, training: bool = False, rng: Optional[np.random.Generator] = None
    ) -> ModelOutput:
        """Logits, probabilities and latent for a batch."""

    def __call__(self, x: ModelInput, training: bool = False, rng=None) -> ModelOutput:
        return self.forward(x, training=training, rng=rng)

    @property
    def dtype(self):
        first = next(iter(self.params.values()))
        return first.dtype

    @property
    def input_size(self) -> int:
        return self.cfg.input_size

    @property
    def num_classes(self) -> int:
        return self.cfg.num_classes

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise CheckpointError(
                f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, value in state.items():
            target = self.params[name]
            if tuple(value.shape) != target.shape:
                raise CheckpointError(f"{name}: shape {value.shape} != expected {target.shape}")
            target.data = np.array(value, dtype=target.dtype)
            target.grad = None
