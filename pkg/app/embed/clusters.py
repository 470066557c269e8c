from collections import Counter
from typing import Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, Field
from sklearn.cluster import KMeans

from app.exceptions import DataError

KMEANS_RESTARTS = 20


class ClusterReport(BaseModel):
    """How well k-means clusters of an embedding line up with synthesizer labels."""

    k: int
    purity: float = Field(..., description="Share of points whose cluster-majority label is their own")
    per_label: Dict[str, float] = Field(default_factory=dict)
    majority_clusters: Dict[str, List[int]] = Field(
        default_factory=dict, description="Clusters in which each label is the majority"
    )

    def has_own_cluster(self, label: str) -> bool:
        return bool(self.majority_clusters.get(label))


def _majority(labels: List[str]) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    return min(name for name, c in counts.items() if c == top)


def cluster_report(Y: np.ndarray, labels: Sequence[str], seed: int = 0) -> ClusterReport:
    Y = np.asarray(Y, dtype=np.float64)
    labels = [str(label) for label in labels]
    if Y.ndim != 2 or Y.shape[0] != len(labels):
        raise DataError(f"{len(labels)} labels for an embedding of shape {Y.shape}")
    names = sorted(set(labels))
    k = len(names)
    if k == 0 or k > Y.shape[0]:
        raise DataError(f"cannot form {k} clusters from {Y.shape[0]} points")

    assignment = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS, random_state=seed).fit_predict(Y)
    cluster_major: Dict[int, str] = {}
    for c in np.unique(assignment):
        cluster_major[int(c)] = _majority([labels[i] for i in np.flatnonzero(assignment == c)])

    hits = np.array([cluster_major[int(c)] == label for c, label in zip(assignment, labels)])
    per_label = {name: float(np.mean(hits[[lab == name for lab in labels]])) for name in names}
    majority_clusters = {
        name: sorted(c for c, major in cluster_major.items() if major == name) for name in names
    }
    return ClusterReport(
        k=k,
        purity=float(np.mean(hits)),
        per_label=per_label,
        majority_clusters=majority_clusters,
    )
