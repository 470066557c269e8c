from typing import List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from app.data.dataset import LabeledSet
from app.exceptions import ConfigError
from app.logger import logger
from app.losses import EPSILON_GRID
from app.models.registry import ModelConfig
from app.schema import LossKind
from app.train.config import TrainConfig
from app.train.trainer import fit

SWEEP_COLUMNS = ["epsilon", "val_acc", "val_loss", "best_epoch"]


class SweepRow(BaseModel):
    epsilon: float
    val_acc: float
    val_loss: float
    best_epoch: int


class SweepResult(BaseModel):
    rows: List[SweepRow]

    @property
    def best(self) -> SweepRow:
        # first row wins ties
        return max(self.rows, key=lambda r: r.val_acc)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=SWEEP_COLUMNS)


def sweep_epsilon(
    model_cfg: ModelConfig,
    data: LabeledSet,
    base: TrainConfig,
    epsilons: Optional[Sequence[float]] = None,
) -> SweepResult:
    """Train one model per epsilon with the base config's seed and compare validation accuracy."""
    if base.loss.kind not in (LossKind.POLY1_CE, LossKind.POLY1_FL):
        raise ConfigError(f"epsilon sweep needs a poly-1 loss, got {base.loss.kind.value}")
    grid = list(EPSILON_GRID if epsilons is None else epsilons)
    if not grid:
        raise ConfigError("epsilon grid is empty")

    rows: List[SweepRow] = []
    for eps in grid:
        cfg = base.model_copy(update={"loss": base.loss.model_copy(update={"epsilon": float(eps)})})
        result = fit(model_cfg, data, cfg)
        best = result.history[result.best_epoch - 1]
        rows.append(SweepRow(epsilon=float(eps), val_acc=best.val_acc, val_loss=best.val_loss, best_epoch=result.best_epoch))
        logger.info(f"sweep eps={eps:g}: val_acc={best.val_acc:.4f} val_loss={best.val_loss:.4f}")
    result = SweepResult(rows=rows)
    logger.info(f"Best epsilon {result.best.epsilon:g} (val_acc={result.best.val_acc:.4f})")
    return result
