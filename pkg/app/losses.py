"""Classification losses on the true-class probability p.

    CE       -ln p
    FL       -(1 - p)^gamma ln p
    Poly1CE  CE + eps (1 - p)
    Poly1FL  FL + eps (1 - p)^(gamma + 1)
"""

from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.exceptions import LabelError, ShapeError
from app.schema import LossKind
from app.tensor import Tensor, ops

P_FLOOR = 1e-12

DEFAULT_EPSILON = {
    LossKind.CE: 0.0,
    LossKind.FL: 0.0,
    LossKind.POLY1_CE: 3.3,
    LossKind.POLY1_FL: 3.0,
}

EPSILON_GRID = (0.0, 0.5, 1.0, 2.0, 3.0, 3.3, 4.0)

Real = Union[float, np.ndarray]


class LossConfig(BaseModel):
    kind: LossKind = LossKind.POLY1_CE
    epsilon: Optional[float] = Field(None, description="Poly-1 coefficient; defaults per kind")
    gamma: float = Field(2.0, ge=0.0, description="Focal modulating exponent")

    @model_validator(mode="after")
    def _default_epsilon(self) -> "LossConfig":
        if self.epsilon is None:
            self.epsilon = DEFAULT_EPSILON[self.kind]
        return self

    def describe(self) -> str:
        if self.kind == LossKind.CE:
            return "ce"
        if self.kind == LossKind.FL:
            return f"fl(gamma={self.gamma:g})"
        if self.kind == LossKind.POLY1_CE:
            return f"poly1ce(eps={self.epsilon:g})"
        return f"poly1fl(gamma={self.gamma:g}, eps={self.epsilon:g})"


def _clamp(p: Real) -> Real:
    return np.maximum(np.asarray(p, dtype=np.float64), P_FLOOR)


def _scalar(value: np.ndarray) -> Real:
    return float(value) if np.ndim(value) == 0 else value


def cross_entropy(p_target: Real) -> Real:
    return _scalar(-np.log(_clamp(p_target)))


def focal(p: Real, gamma: float) -> Real:
    p = _clamp(p)
    return _scalar(-np.power(1.0 - p, gamma) * np.log(p))


def poly1_ce(p: Real, epsilon: float) -> Real:
    p = _clamp(p)
    return _scalar(-np.log(p) + epsilon * (1.0 - p))


def poly1_fl(p: Real, gamma: float, epsilon: float) -> Real:
    p = _clamp(p)
    return _scalar(-np.power(1.0 - p, gamma) * np.log(p) + epsilon * np.power(1.0 - p, gamma + 1.0))


def per_sample_loss(p: Real, cfg: LossConfig) -> Real:
    if cfg.kind == LossKind.CE:
        return cross_entropy(p)
    if cfg.kind == LossKind.FL:
        return focal(p, cfg.gamma)
    if cfg.kind == LossKind.POLY1_CE:
        return poly1_ce(p, cfg.epsilon)
    return poly1_fl(p, cfg.gamma, cfg.epsilon)


def check_targets(targets: Sequence[int], num_classes: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.ndim != 1:
        raise ShapeError(f"targets must be a vector of class indices, got shape {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        bad = targets[(targets < 0) | (targets >= num_classes)][0]
        raise LabelError(f"target {int(bad)} is outside classes 0..{num_classes - 1}")
    return targets.astype(np.int64)


def batch_loss(probabilities: Union[Tensor, np.ndarray], targets: Sequence[int], cfg: LossConfig) -> Tensor:
    """Mean per-sample loss of the true-class probabilities; differentiable in ``probabilities``."""
    if not isinstance(probabilities, Tensor):
        probabilities = Tensor(np.asarray(probabilities, dtype=np.float64))
    if probabilities.ndim != 2:
        raise ShapeError(f"probabilities must be [batch, classes], got {probabilities.shape}")
    targets = check_targets(targets, probabilities.shape[1])
    if targets.shape[0] != probabilities.shape[0]:
        raise ShapeError(f"{targets.shape[0]} targets for {probabilities.shape[0]} samples")

    p = ops.clip(ops.pick(probabilities, targets), P_FLOOR, None)
    ce = ops.neg(ops.log(p))
    miss = ops.sub(1.0, p)
    if cfg.kind == LossKind.CE:
        per_sample = ce
    elif cfg.kind == LossKind.FL:
        per_sample = ops.mul(ops.power(miss, cfg.gamma), ce)
    elif cfg.kind == LossKind.POLY1_CE:
        per_sample = ops.add(ce, ops.mul(miss, cfg.epsilon))
    else:
        focal_term = ops.mul(ops.power(miss, cfg.gamma), ce)
        per_sample = ops.add(focal_term, ops.mul(ops.power(miss, cfg.gamma + 1.0), cfg.epsilon))
    return ops.mean(per_sample)
