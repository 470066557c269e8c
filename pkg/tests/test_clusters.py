import numpy as np
import pytest

from app.embed import cluster_report
from app.exceptions import DataError


def build_groups(seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    Y = np.concatenate([c + 0.5 * rng.normal(size=(15, 2)) for c in centers])
    labels = ["alpha"] * 15 + ["beta"] * 15 + ["gamma"] * 15
    return Y, labels


def test_separated_groups_are_pure():
    Y, labels = build_groups()

    report = cluster_report(Y, labels, seed=0)

    assert report.k == 3
    assert report.purity == pytest.approx(1.0)
    assert report.per_label == {"alpha": 1.0, "beta": 1.0, "gamma": 1.0}
    assert all(report.has_own_cluster(name) for name in ("alpha", "beta", "gamma"))


def test_label_sharing_points_loses_majority_ties():
    Y, labels = build_groups()
    # every gamma point duplicates an alpha point
    Y[30:] = Y[:15]

    report = cluster_report(Y, labels, seed=0)

    assert not report.has_own_cluster("gamma")
    assert report.per_label["gamma"] == 0.0
    assert report.per_label["alpha"] == 1.0
    assert report.purity == pytest.approx(2 / 3)


def test_cluster_report_input_errors():
    Y, labels = build_groups()

    with pytest.raises(DataError):
        cluster_report(Y, labels[:-1])
    with pytest.raises(DataError):
        cluster_report(Y[:, 0], labels)
    with pytest.raises(DataError):
        cluster_report(np.zeros((0, 2)), [])
