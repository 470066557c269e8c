from typing import Sequence, Union

import numpy as np

from app.evaluation.metrics import Truth, confusion_from_indices, truth_indices, weighted_metrics
from app.exceptions import DataError
from app.schema import BaselineKind, Metrics


def constant_class(kind: Union[BaselineKind, str], train_counts: Sequence[int]) -> int:
    """Least (minority) or most (majority) frequent training class; ties go to the lowest index."""
    counts = np.asarray(train_counts, dtype=np.int64)
    if counts.size == 0:
        raise DataError("baseline needs training counts")
    if BaselineKind(kind) == BaselineKind.MAJORITY:
        return int(np.argmax(counts))
    return int(np.argmin(counts))


def baseline_constant(
    kind: Union[BaselineKind, str],
    train_counts: Sequence[int],
    test_truths: Sequence[Truth],
    open_set: bool = False,
) -> Metrics:
    """Metrics of a classifier that always predicts the same known class."""
    num_known = len(train_counts)
    k = num_known + 1 if open_set else num_known
    rows = truth_indices(test_truths, k, open_set)
    predicted = np.full(rows.shape, constant_class(kind, train_counts), dtype=np.int64)
    return weighted_metrics(confusion_from_indices(predicted, rows, k, open_set))
