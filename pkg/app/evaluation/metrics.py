from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.evaluation.attribution import decide_batch, decisions_to_indices
from app.exceptions import DataError, LabelError
from app.schema import (
    UNKNOWN_LABEL,
    AttributionMode,
    ClassMetrics,
    ConfusionMatrix,
    Decision,
    Metrics,
)

Truth = Optional[int]


def truth_indices(truths: Sequence[Truth], k: int, open_set: bool) -> np.ndarray:
    """Map truths to rows; None or negative (unknown synthesizer) goes to row U = k - 1 in open mode."""
    rows = np.array([-1 if t is None else int(t) for t in truths], dtype=np.int64)
    unknown = rows < 0
    if unknown.any():
        if not open_set:
            raise LabelError("unknown-synthesizer truths need an open-set confusion matrix")
        rows[unknown] = k - 1
    if rows.size and rows.max() >= k:
        raise LabelError(f"truth {int(rows.max())} is outside a {k}-class confusion matrix")
    return rows


def confusion_from_indices(predicted: np.ndarray, rows: np.ndarray, k: int, open_set: bool = False) -> ConfusionMatrix:
    predicted = np.asarray(predicted, dtype=np.int64)
    if predicted.shape != rows.shape:
        raise DataError(f"{predicted.size} decisions for {rows.size} truths")
    if predicted.size and (predicted.min() < 0 or predicted.max() >= k):
        raise LabelError(f"prediction outside a {k}-class confusion matrix")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (rows, predicted), 1)
    return ConfusionMatrix(counts=counts.tolist(), open_set=open_set)


def confusion(
    decisions: Sequence[Decision],
    truths: Sequence[Truth],
    k: int,
    open_set: Optional[bool] = None,
) -> ConfusionMatrix:
    """Count (true row, predicted column) pairs; in open mode the last index is U."""
    if open_set is None:
        open_set = any(d.is_unknown for d in decisions) or any(t is None or t < 0 for t in truths)
    num_known = k - 1 if open_set else k
    if not open_set and any(d.is_unknown for d in decisions):
        raise LabelError("closed-set confusion cannot hold U decisions")
    predicted = np.array(decisions_to_indices(decisions, num_known), dtype=np.int64)
    return confusion_from_indices(predicted, truth_indices(truths, k, open_set), k, open_set)


def _per_class(cm: ConfusionMatrix):
    counts = cm.as_array().astype(np.float64)
    if counts.sum() == 0:
        raise DataError("confusion matrix is empty")
    tp = np.diag(counts)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return tp, support, precision, recall, f1


def weighted_metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy and support-weighted precision / recall / F1 (zero-division counts as 0)."""
    tp, support, precision, recall, f1 = _per_class(cm)
    total = support.sum()
    weights = support / total
    accuracy = float(tp.sum() / total)
    return Metrics(
        accuracy=accuracy,
        precision=float(np.dot(weights, precision)),
        recall=float(np.dot(weights, recall)),
        f1=float(np.dot(weights, f1)),
    )


def class_labels(cm: ConfusionMatrix, class_names: Optional[Sequence[str]] = None) -> List[str]:
    num_known = cm.size - 1 if cm.open_set else cm.size
    names = list(class_names) if class_names else [str(i) for i in range(num_known)]
    if len(names) != num_known:
        raise LabelError(f"{len(names)} class names for {num_known} known classes")
    return names + [UNKNOWN_LABEL] if cm.open_set else names


def per_class_report(cm: ConfusionMatrix, class_names: Optional[Sequence[str]] = None) -> List[ClassMetrics]:
    _, support, precision, recall, f1 = _per_class(cm)
    return [
        ClassMetrics(label=name, precision=float(p), recall=float(r), f1=float(f), support=int(s))
        for name, p, r, f, s in zip(class_labels(cm, class_names), precision, recall, f1, support)
    ]


def threshold_sweep(
    probabilities: np.ndarray,
    truths: Sequence[Truth],
    thresholds: Union[Sequence[float], np.ndarray],
) -> pd.DataFrame:
    """Open-set metrics per T, plus the share of unknown-synthesizer samples sent to U."""
    probs = np.asarray(probabilities, dtype=np.float64)
    k = probs.shape[1] + 1
    rows = truth_indices(truths, k, open_set=True)
    unknown_rows = rows == k - 1
    records = []
    for t in thresholds:
        predicted = decide_batch(probs, AttributionMode.OPEN, t)
        metrics = weighted_metrics(confusion_from_indices(predicted, rows, k, open_set=True))
        unknown_recall = float(np.mean(predicted[unknown_rows] == k - 1)) if unknown_rows.any() else float("nan")
        known_retained = float(np.mean(predicted[~unknown_rows] < k - 1)) if (~unknown_rows).any() else float("nan")
        records.append(
            {
                "threshold": float(t),
                **metrics.model_dump(),
                "unknown_recall": unknown_recall,
                "known_retained": known_retained,
            }
        )
    return pd.DataFrame.from_records(records)
