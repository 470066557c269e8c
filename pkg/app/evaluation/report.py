from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.artifacts import provenance, write_csv
from app.evaluation.attribution import decide_batch
from app.evaluation.metrics import class_labels, confusion_from_indices, per_class_report, truth_indices, weighted_metrics
from app.exceptions import DataError
from app.schema import AttributionMode, ClassMetrics, ConfusionMatrix, Metrics

PREDICTION_COLUMNS = ["path", "truth", "prediction", "p_m"]


class Evaluation(BaseModel):
    """Outcome of scoring one probability matrix against its truths."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: AttributionMode
    threshold: Optional[float]
    confusion: ConfusionMatrix
    metrics: Metrics
    per_class: List[ClassMetrics]
    labels: List[str]
    predicted: np.ndarray
    truth_rows: np.ndarray
    p_m: np.ndarray


def evaluate_probabilities(
    probabilities: np.ndarray,
    truths: Sequence[int],
    mode: Union[AttributionMode, str],
    threshold: float = 0.5,
    class_names: Optional[Sequence[str]] = None,
) -> Evaluation:
    """Decide every row, then build the confusion matrix and metrics.

    ``truths`` holds known-class indices, with -1 for unknown synthesizers
    (allowed in open mode only).
    """
    mode = AttributionMode(mode)
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.shape[0] != len(truths):
        raise DataError(f"{probs.shape[0]} probability rows for {len(truths)} truths")
    open_set = mode == AttributionMode.OPEN
    k = probs.shape[1] + 1 if open_set else probs.shape[1]
    rows = truth_indices(truths, k, open_set)
    predicted = decide_batch(probs, mode, threshold)
    cm = confusion_from_indices(predicted, rows, k, open_set)
    return Evaluation(
        mode=mode,
        threshold=threshold if open_set else None,
        confusion=cm,
        metrics=weighted_metrics(cm),
        per_class=per_class_report(cm, class_names),
        labels=class_labels(cm, class_names),
        predicted=predicted,
        truth_rows=rows,
        p_m=probs.max(axis=1),
    )


def build_report(
    evaluation: Evaluation,
    run_config: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    report = provenance(run_config, seed)
    report.update(
        {
            "mode": evaluation.mode.value,
            "threshold": evaluation.threshold,
            "labels": evaluation.labels,
            "confusion": evaluation.confusion.counts,
            "support": dict(zip(evaluation.labels, evaluation.confusion.support)),
            "metrics": evaluation.metrics.model_dump(),
            "per_class": [c.model_dump() for c in evaluation.per_class],
        }
    )
    if extra:
        report.update(extra)
    return report


def predictions_frame(evaluation: Evaluation, paths: Sequence[str]) -> pd.DataFrame:
    labels = evaluation.labels
    return pd.DataFrame(
        {
            "path": list(paths),
            "truth": [labels[i] for i in evaluation.truth_rows],
            "prediction": [labels[i] for i in evaluation.predicted],
            "p_m": evaluation.p_m,
        },
        columns=PREDICTION_COLUMNS,
    )


def write_predictions(
    path: Union[str, Path], evaluation: Evaluation, paths: Sequence[str], stamp: Dict[str, Any]
) -> Path:
    return write_csv(path, predictions_frame(evaluation, paths), stamp)
