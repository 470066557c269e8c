from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator


class LossKind(str, Enum):
    """Classification loss options"""

    CE = "ce"
    FL = "fl"
    POLY1_CE = "poly1ce"
    POLY1_FL = "poly1fl"


class ArchKind(str, Enum):
    CAT = "cat"
    CNN = "cnn"
    MLP = "mlp"


class OptimizerKind(str, Enum):
    ADAM = "adam"
    ADAMW = "adamw"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class AttributionMode(str, Enum):
    """closed: argmax over N known classes; open: N + 1 with the unknown category U"""

    CLOSED = "closed"
    OPEN = "open"


class BaselineKind(str, Enum):
    MINORITY = "minority"
    MAJORITY = "majority"


UNKNOWN_LABEL = "U"
PROBABILITY_TOLERANCE = 1e-6


class ProbabilitySet(BaseModel):
    """The N per-synthesizer probabilities P produced by a classifier."""

    probs: List[float] = Field(..., min_length=1)

    @field_validator("probs")
    @classmethod
    def _is_distribution(cls, value: List[float]) -> List[float]:
        arr = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(arr.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"probabilities sum to {arr.sum():.8f}, expected 1")
        return value

    @classmethod
    def of(cls, value: Union["ProbabilitySet", Sequence[float], np.ndarray]) -> "ProbabilitySet":
        if isinstance(value, ProbabilitySet):
            return value
        return cls(probs=[float(p) for p in np.asarray(value, dtype=np.float64).ravel()])

    @property
    def p_m(self) -> float:
        return max(self.probs)

    @property
    def argmax(self) -> int:
        # list.index returns the first maximum: ties go to the lowest class
        return self.probs.index(self.p_m)

    def __len__(self) -> int:
        return len(self.probs)


class Decision(BaseModel):
    """Attribution outcome: a known class index, or None for the unknown category U."""

    label: Optional[int] = Field(None, ge=0)
    confidence: float = Field(..., ge=0.0, le=1.0, description="p_m")

    @property
    def is_unknown(self) -> bool:
        return self.label is None

    def display(self, class_names: Optional[Sequence[str]] = None) -> str:
        if self.is_unknown:
            return f"unknown ({UNKNOWN_LABEL})"
        if class_names:
            return class_names[self.label]
        return str(self.label)


class ConfusionMatrix(BaseModel):
    """Rows are true classes, columns predicted; the last row/column is U in open mode."""

    counts: List[List[int]]
    open_set: bool = False

    @field_validator("counts")
    @classmethod
    def _square(cls, value: List[List[int]]) -> List[List[int]]:
        k = len(value)
        if any(len(row) != k for row in value):
            raise ValueError("confusion matrix must be square")
        if any(c < 0 for row in value for c in row):
            raise ValueError("confusion counts must be non-negative")
        return value

    @property
    def size(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(sum(sum(row) for row in self.counts))

    @property
    def support(self) -> List[int]:
        return [int(sum(row)) for row in self.counts]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64).reshape(self.size, self.size)


class Metrics(BaseModel):
    accuracy: float
    precision: float
    recall: float
    f1: float


class ClassMetrics(BaseModel):
    label: str
    precision: float
    recall: float
    f1: float
    support: int


class HistoryRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
