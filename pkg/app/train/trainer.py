"""Supervised training with early stopping on validation loss."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.artifacts import write_csv
from app.data.dataset import LabeledSet
from app.data.split import stratified_split
from app.exceptions import DataError, LabelError
from app.logger import logger
from app.losses import LossConfig, batch_loss, check_targets, per_sample_loss
from app.models.base import BaseClassifier
from app.models.registry import ModelConfig, build_model, predict
from app.schema import HistoryRecord
from app.tensor import backward, ops
from app.tensor.random import STREAM_DROPOUT, STREAM_SHUFFLE, philox
from app.train.config import TrainConfig
from app.train.optim import Optimizer

HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "val_acc"]
THRESHOLD_BOUNDS = (1e-6, 1.0 - 1e-6)


class FitResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: BaseClassifier
    history: List[HistoryRecord]
    best_epoch: int
    best_val_loss: float
    threshold: float
    stopped_early: bool


def calibrate_threshold(known_max_probs: np.ndarray, known_recall_target: float = 0.95) -> float:
    """Largest T that still attributes at least ``known_recall_target`` of known samples (p_m > T)."""
    q = np.sort(np.asarray(known_max_probs, dtype=np.float64))
    if q.size == 0:
        raise DataError("threshold calibration needs at least one known-class sample")
    allowed_misses = int(np.floor((1.0 - known_recall_target) * q.size))
    threshold = np.nextafter(q[allowed_misses], 0.0)
    return float(np.clip(threshold, *THRESHOLD_BOUNDS))


def evaluate_split(
    model: BaseClassifier, x: np.ndarray, y: np.ndarray, loss_cfg: LossConfig, batch_size: int
) -> Tuple[float, float, np.ndarray]:
    """Mean loss, accuracy and the probability rows of a labeled array."""
    probs = predict(model, x, batch_size=batch_size).probabilities.astype(np.float64)
    p_true = probs[np.arange(len(y)), y]
    loss = float(np.mean(per_sample_loss(p_true, loss_cfg)))
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc, probs


def _train_epoch(
    model: BaseClassifier,
    optimizer: Optimizer,
    x: np.ndarray,
    y: np.ndarray,
    order: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> float:
    total = 0.0
    for start in range(0, len(order), cfg.batch_size):
        batch = order[start : start + cfg.batch_size]
        optimizer.zero_grad()
        for m_start in range(0, len(batch), cfg.micro_batch_size):
            micro = batch[m_start : m_start + cfg.micro_batch_size]
            out = model.forward(x[micro], training=True, rng=rng)
            loss = batch_loss(out.probabilities, y[micro], cfg.loss)
            total += loss.item() * len(micro)
            # size-weighted so the accumulated gradient equals the full-batch mean
            backward(ops.mul(loss, len(micro) / len(batch)))
        optimizer.step()
    return total / len(order)


def fit(
    model_cfg: ModelConfig,
    data: LabeledSet,
    cfg: TrainConfig,
) -> FitResult:
    """Train ``cfg.arch`` on the known-class rows of ``data`` and keep the best-validation weights."""
    keep = data.y >= 0
    x, y = data.x[keep], data.y[keep]
    num_classes = model_cfg.num_classes
    y = check_targets(y, num_classes)
    if len(np.unique(y)) < 2:
        raise LabelError("training needs at least two classes")

    train_idx, val_idx = stratified_split(list(range(len(y))), cfg.validation_fraction, cfg.seed, key=lambda i: int(y[i]))
    train_idx, val_idx = np.asarray(train_idx, dtype=np.int64), np.asarray(val_idx, dtype=np.int64)
    counts = np.bincount(y[train_idx], minlength=num_classes)
    empty = [c for c in range(num_classes) if counts[c] == 0]
    if empty:
        raise DataError(f"classes {empty} have no training samples")
    if val_idx.size == 0:
        raise DataError("validation split is empty; add samples or raise validation_fraction")

    model = build_model(cfg.arch, model_cfg, seed=cfg.seed)
    optimizer = Optimizer(model.params, cfg.optimizer, lr=cfg.lr, weight_decay=cfg.weight_decay)
    shuffle_rng = philox(cfg.seed, STREAM_SHUFFLE)
    dropout_rng = philox(cfg.seed, STREAM_DROPOUT)
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    logger.info(
        f"Training {cfg.arch.value} ({model.param_count()} params) on {len(train_idx)} samples, "
        f"validating on {len(val_idx)}, loss {cfg.loss.describe()}"
    )

    history: List[HistoryRecord] = []
    best_loss, best_epoch, best_state = np.inf, 0, model.state_dict()
    wait = 0
    stopped_early = False
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_idx))
        train_loss = _train_epoch(model, optimizer, x_train, y_train, order, cfg, dropout_rng)
        val_loss, val_acc, _ = evaluate_split(model, x_val, y_val, cfg.loss, cfg.batch_size)
        history.append(HistoryRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss, val_acc=val_acc))

        if val_loss < best_loss:
            best_loss, best_epoch, best_state = val_loss, epoch, model.state_dict()
            wait = 0
        else:
            wait += 1
        logger.info(
            f"epoch {epoch:3d} train_loss={train_loss:.4f} val_loss={val_loss:.4f} "
            f"val_acc={val_acc:.4f} patience={wait}/{cfg.patience}"
        )
        if wait >= cfg.patience:
            stopped_early = True
            logger.info(f"Early stop at epoch {epoch}; best epoch {best_epoch} (val_loss={best_loss:.4f})")
            break

    model.load_state_dict(best_state)
    _, _, val_probs = evaluate_split(model, x_val, y_val, cfg.loss, cfg.batch_size)
    threshold = calibrate_threshold(val_probs.max(axis=1), cfg.known_recall_target)
    logger.info(f"Calibrated open-set threshold T={threshold:.6f} (known recall target {cfg.known_recall_target})")
    return FitResult(
        model=model,
        history=history,
        best_epoch=best_epoch,
        best_val_loss=float(best_loss),
        threshold=threshold,
        stopped_early=stopped_early,
    )


def history_frame(history: List[HistoryRecord]) -> pd.DataFrame:
    return pd.DataFrame([h.model_dump() for h in history], columns=HISTORY_COLUMNS)


def write_history(path: Union[str, Path], history: List[HistoryRecord], stamp: Dict[str, Any]) -> Path:
    return write_csv(path, history_frame(history), stamp)
