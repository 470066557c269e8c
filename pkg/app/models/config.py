from typing import Tuple

from pydantic import BaseModel, Field, model_validator

SPEC_SIDE = 128


class CatConfig(BaseModel):
    """Compact attribution transformer hyperparameters."""

    conv_channels: Tuple[int, int] = Field(
        (64, 128), description="Output channels of the two tokenizer convolutions"
    )
    embed_dim: int = Field(128, ge=1, description="Token width")
    num_layers: int = Field(2, ge=1, description="Transformer encoder blocks")
    num_heads: int = Field(2, ge=1, description="Attention heads per block")
    mlp_ratio: float = Field(2.0, gt=0.0, description="Hidden width of the block MLP / embed_dim")
    drop_path_rate: float = Field(0.1, ge=0.0, lt=1.0, description="Stochastic depth of the last block")
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    num_classes: int = Field(8, ge=2)
    input_size: int = Field(SPEC_SIDE, ge=4, description="Side of the square input spectrogram")

    @model_validator(mode="after")
    def _check_shapes(self) -> "CatConfig":
        if self.embed_dim % self.num_heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        if self.input_size % 4:
            raise ValueError(f"input_size {self.input_size} must be divisible by 4 (two 2x2 pools)")
        if min(self.conv_channels) < 1:
            raise ValueError("conv_channels must be positive")
        return self

    @property
    def grid_side(self) -> int:
        return self.input_size // 4

    @property
    def num_tokens(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def mlp_hidden(self) -> int:
        return max(1, int(round(self.mlp_ratio * self.embed_dim)))


class CnnConfig(BaseModel):
    """Two conv layers followed by two dense layers."""

    conv_channels: Tuple[int, int] = Field((16, 32))
    dense_units: int = Field(128, ge=1, description="First dense layer width")
    conv_dropout: float = Field(0.25, ge=0.0, lt=1.0)
    dense_dropout: float = Field(0.5, ge=0.0, lt=1.0)
    num_classes: int = Field(8, ge=2)
    input_size: int = Field(SPEC_SIDE, ge=4)

    @model_validator(mode="after")
    def _check_shapes(self) -> "CnnConfig":
        if self.input_size % 4:
            raise ValueError(f"input_size {self.input_size} must be divisible by 4")
        return self

    @property
    def flat_features(self) -> int:
        side = self.input_size // 4
        return self.conv_channels[1] * side * side


class MlpConfig(BaseModel):
    """Two sigmoid hidden layers on the flattened spectrogram."""

    hidden: Tuple[int, int] = Field((1500, 1500))
    num_classes: int = Field(8, ge=2)
    input_size: int = Field(SPEC_SIDE, ge=1)

    @property
    def in_features(self) -> int:
        return self.input_size * self.input_size
