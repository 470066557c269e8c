"""Adam and AdamW on numpy parameter arrays."""

from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import ConfigError, ShapeError
from app.schema import OptimizerKind
from app.tensor import Tensor


class OptimState(BaseModel):
    """Moments and step counter of one parameter, plus the update hyperparameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    lr: float = Field(1e-3, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    t: int = Field(0, ge=0)


def _moments(param: np.ndarray, grad: np.ndarray, state: OptimState):
    if param.shape != grad.shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match parameter {param.shape}")
    m = np.zeros_like(param, dtype=np.float64) if state.m is None else state.m
    v = np.zeros_like(param, dtype=np.float64) if state.v is None else state.v
    if m.shape != param.shape or v.shape != param.shape:
        raise ShapeError(f"optimizer moments {m.shape} do not match parameter {param.shape}")
    t = state.t + 1
    g = grad.astype(np.float64)
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return m, v, t, step


def adamw_step(param: np.ndarray, grad: np.ndarray, state: OptimState) -> Tuple[np.ndarray, OptimState]:
    """One AdamW update with decoupled weight decay lr * wd * param."""
    m, v, t, step = _moments(param, grad, state)
    p = param.astype(np.float64)
    updated = p - step - state.lr * state.weight_decay * p
    return updated.astype(param.dtype), state.model_copy(update={"m": m, "v": v, "t": t})


def adam_step(param: np.ndarray, grad: np.ndarray, state: OptimState) -> Tuple[np.ndarray, OptimState]:
    m, v, t, step = _moments(param, grad, state)
    updated = param.astype(np.float64) - step
    return updated.astype(param.dtype), state.model_copy(update={"m": m, "v": v, "t": t})


STEP_FUNCTIONS = {
    OptimizerKind.ADAM: adam_step,
    OptimizerKind.ADAMW: adamw_step,
}


class Optimizer:
    """Applies a per-parameter step function to every named tensor that has a gradient."""

    def __init__(
        self,
        params: Dict[str, Tensor],
        kind: OptimizerKind = OptimizerKind.ADAMW,
        lr: float = 1e-4,
        weight_decay: float = 0.0,
    ):
        if lr < 0:
            raise ConfigError(f"learning rate must be non-negative, got {lr}")
        self.kind = OptimizerKind(kind)
        self.params = params
        self.step_fn = STEP_FUNCTIONS[self.kind]
        decay = weight_decay if self.kind == OptimizerKind.ADAMW else 0.0
        self.states: Dict[str, OptimState] = {
            name: OptimState(lr=lr, weight_decay=decay) for name in params
        }

    def step(self) -> None:
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            tensor.data, self.states[name] = self.step_fn(tensor.data, tensor.grad, self.states[name])

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    @property
    def steps(self) -> int:
        return max((s.t for s in self.states.values()), default=0)
