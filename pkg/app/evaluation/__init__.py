"""Attribution decisions, confusion matrices, weighted metrics and baselines."""

from app.evaluation.attribution import attribute_closed, attribute_open, check_threshold, decide_batch
from app.evaluation.baselines import baseline_constant, constant_class
from app.evaluation.metrics import confusion, per_class_report, threshold_sweep, weighted_metrics
from app.evaluation.report import Evaluation, build_report, evaluate_probabilities, write_predictions

__all__ = [
    "Evaluation",
    "attribute_closed",
    "attribute_open",
    "baseline_constant",
    "build_report",
    "check_threshold",
    "confusion",
    "constant_class",
    "decide_batch",
    "evaluate_probabilities",
    "per_class_report",
    "threshold_sweep",
    "weighted_metrics",
    "write_predictions",
]
