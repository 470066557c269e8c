from typing import Any, Dict, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.config import config
from app.exceptions import ConfigError
from app.losses import LossConfig
from app.schema import ArchKind, LossKind, OptimizerKind

# training protocol per architecture
PROTOCOL_DEFAULTS: Dict[ArchKind, Dict[str, Any]] = {
    ArchKind.CAT: {
        "epochs": 100,
        "patience": 10,
        "batch_size": 128,
        "optimizer": OptimizerKind.ADAMW,
        "lr": 1e-4,
        "weight_decay": 1e-4,
        "loss": {"kind": LossKind.POLY1_CE, "epsilon": 3.3},
    },
    ArchKind.CNN: {
        "epochs": 100,
        "patience": 10,
        "batch_size": 128,
        "optimizer": OptimizerKind.ADAM,
        "lr": 1e-3,
        "weight_decay": 0.0,
        "loss": {"kind": LossKind.CE},
    },
    ArchKind.MLP: {
        "epochs": 200,
        "patience": 10,
        "batch_size": 200,
        "optimizer": OptimizerKind.ADAM,
        "lr": 1e-4,
        "weight_decay": 0.0,
        "loss": {"kind": LossKind.CE},
    },
}


class TrainConfig(BaseModel):
    arch: ArchKind = ArchKind.CAT
    epochs: int = Field(100, ge=1)
    patience: int = Field(10, description="Epochs without val-loss improvement before stopping")
    batch_size: int = Field(128, ge=1)
    micro_batch_size: int = Field(16, ge=1, description="Gradient-accumulation chunk")
    seed: int = 0
    validation_fraction: float = Field(0.1, description="Stratified hold-out share")
    loss: LossConfig = Field(default_factory=LossConfig)
    optimizer: OptimizerKind = OptimizerKind.ADAMW
    lr: float = Field(1e-4, ge=0.0)
    weight_decay: float = Field(1e-4, ge=0.0)
    known_recall_target: float = Field(
        0.95, gt=0.0, le=1.0, description="Known-class retention used to calibrate T"
    )

    @model_validator(mode="after")
    def _check_protocol(self) -> "TrainConfig":
        if not 1 <= self.patience <= self.epochs:
            raise ValueError(f"patience must be in [1, epochs={self.epochs}], got {self.patience}")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ValueError(
                f"validation_fraction must be in (0, 0.5), got {self.validation_fraction}"
            )
        return self


def train_config_for(arch: Union[ArchKind, str], **overrides: Any) -> TrainConfig:
    """Protocol defaults for ``arch`` < ``[train.<arch>]`` in config.toml < ``overrides``."""
    arch = ArchKind(arch)
    values: Dict[str, Any] = dict(PROTOCOL_DEFAULTS[arch])
    values.update(config.train_overrides(arch.value))
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["arch"] = arch
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid training config: {e}") from e
