"""Closed- and open-set attribution decisions from class probabilities."""

from typing import List, Sequence, Union

import numpy as np

from app.exceptions import ConfigError, ShapeError
from app.schema import AttributionMode, Decision, ProbabilitySet

ProbabilityLike = Union[ProbabilitySet, Sequence[float], np.ndarray]


def check_threshold(threshold: float) -> float:
    threshold = float(threshold)
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold T must lie in (0, 1), got {threshold}")
    return threshold


def attribute_closed(p: ProbabilityLike) -> Decision:
    """Most probable known synthesizer; ties go to the lowest class index."""
    p = ProbabilitySet.of(p)
    return Decision(label=p.argmax, confidence=p.p_m)


def attribute_open(p: ProbabilityLike, threshold: float) -> Decision:
    """Known class when p_m > T, otherwise the unknown category U (p_m == T is U)."""
    threshold = check_threshold(threshold)
    p = ProbabilitySet.of(p)
    if p.p_m > threshold:
        return Decision(label=p.argmax, confidence=p.p_m)
    return Decision(label=None, confidence=p.p_m)


def decide_batch(
    probabilities: np.ndarray, mode: AttributionMode, threshold: float = 0.5
) -> np.ndarray:
    """Vectorized decisions as class indices; U is encoded as N (the number of known classes)."""
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probabilities must be [samples, classes], got {probs.shape}")
    labels = probs.argmax(axis=1)
    if AttributionMode(mode) == AttributionMode.OPEN:
        threshold = check_threshold(threshold)
        labels = np.where(probs.max(axis=1) > threshold, labels, probs.shape[1])
    return labels.astype(np.int64)


def decisions_to_indices(decisions: Sequence[Decision], num_known: int) -> List[int]:
    return [num_known if d.is_unknown else int(d.label) for d in decisions]
