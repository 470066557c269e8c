import numpy as np
import pytest
from pydantic import ValidationError
from sklearn.metrics import precision_recall_fscore_support

from app.artifacts import read_csv
from app.data import table_one_counts
from app.evaluation import (
    attribute_closed,
    attribute_open,
    baseline_constant,
    build_report,
    confusion,
    constant_class,
    decide_batch,
    evaluate_probabilities,
    per_class_report,
    threshold_sweep,
    weighted_metrics,
    write_predictions,
)
from app.evaluation.report import PREDICTION_COLUMNS
from app.exceptions import ConfigError, DataError, LabelError
from app.schema import ConfusionMatrix, Decision


def build_confusion(truths, predicted, k, open_set=False):
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (np.asarray(truths), np.asarray(predicted)), 1)
    return ConfusionMatrix(counts=counts.tolist(), open_set=open_set)


def test_two_class_reference_metrics():
    metrics = weighted_metrics(ConfusionMatrix(counts=[[8, 2], [3, 7]]))

    assert metrics.accuracy == pytest.approx(0.75)
    assert metrics.recall == pytest.approx(0.75)
    assert metrics.precision == pytest.approx(0.752525, abs=1e-6)
    assert metrics.f1 == pytest.approx(0.749373, abs=1e-6)


def test_weighted_metrics_match_sklearn():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(5, 60))
        truths = rng.integers(0, k, size=n)
        predicted = rng.integers(0, k, size=n)

        metrics = weighted_metrics(build_confusion(truths, predicted, k))

        p, r, f, _ = precision_recall_fscore_support(
            truths, predicted, labels=list(range(k)), average="weighted", zero_division=0
        )
        assert metrics.precision == pytest.approx(p, abs=1e-12)
        assert metrics.recall == pytest.approx(r, abs=1e-12)
        assert metrics.f1 == pytest.approx(f, abs=1e-12)


def test_weighted_recall_equals_accuracy():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        k = int(rng.integers(2, 10))
        counts = rng.integers(0, 20, size=(k, k))
        counts[0, 0] += 1
        cm = ConfusionMatrix(counts=counts.tolist())

        metrics = weighted_metrics(cm)

        assert metrics.recall == pytest.approx(np.trace(counts) / counts.sum(), abs=1e-12)
    # a class with no support contributes nothing
    sparse = weighted_metrics(ConfusionMatrix(counts=[[3, 1, 0], [0, 0, 0], [2, 0, 4]]))
    assert sparse.recall == pytest.approx(0.7)
    assert sparse.recall == pytest.approx(sparse.accuracy)


def test_empty_confusion_matrix_is_rejected():
    with pytest.raises(DataError):
        weighted_metrics(ConfusionMatrix(counts=[[0, 0], [0, 0]]))
    with pytest.raises(ValidationError):
        ConfusionMatrix(counts=[[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize(
    "open_set, kind, expected",
    [
        (False, "majority", 1500 / 9100),
        (False, "minority", 300 / 9100),
        (True, "majority", 0.15),
        (True, "minority", 0.03),
    ],
)
def test_reference_corpus_baselines(open_set, kind, expected):
    counts = table_one_counts()

    metrics = baseline_constant(kind, counts.train_counts(), counts.test_truths(open_set), open_set)

    assert metrics.accuracy == pytest.approx(expected)
    assert metrics.recall == pytest.approx(expected)
    assert round(100 * metrics.accuracy, 2) == {
        (False, "majority"): 16.48,
        (False, "minority"): 3.30,
        (True, "majority"): 15.0,
        (True, "minority"): 3.0,
    }[(open_set, kind)]


def test_reference_corpus_sizes():
    counts = table_one_counts()

    assert len(counts.class_names) == 8
    assert counts.test_truths(False).size == 9100
    assert counts.test_truths(True).size == 10000
    assert constant_class("majority", counts.train_counts()) == 0
    assert constant_class("minority", counts.train_counts()) == 1


def test_closed_attribution_takes_first_maximum():
    decision = attribute_closed([0.4, 0.4, 0.2])

    assert decision.label == 0
    assert decision.confidence == pytest.approx(0.4)


def test_open_attribution_tie_goes_to_unknown():
    assert attribute_open([0.5, 0.3, 0.2], 0.5).is_unknown
    assert attribute_open([0.5, 0.3, 0.2], 0.49).label == 0
    assert attribute_open([0.2, 0.7, 0.1], 0.5).display(["a", "b", "c"]) == "b"
    assert attribute_open([0.4, 0.3, 0.3], 0.5).display() == "unknown (U)"


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.5])
def test_threshold_must_be_inside_unit_interval(threshold):
    with pytest.raises(ConfigError):
        attribute_open([0.6, 0.4], threshold)


def test_probabilities_must_form_a_distribution():
    with pytest.raises(ValidationError):
        attribute_closed([0.6, 0.6])
    with pytest.raises(ValidationError):
        attribute_closed([1.2, -0.2])


def test_decide_batch_encodes_unknown_as_class_count():
    probs = np.array([[0.9, 0.1], [0.55, 0.45], [0.3, 0.7]])

    assert decide_batch(probs, "closed").tolist() == [0, 0, 1]
    assert decide_batch(probs, "open", 0.6).tolist() == [0, 2, 1]


def test_confusion_from_decisions():
    decisions = [Decision(label=0, confidence=0.9), Decision(label=None, confidence=0.4), Decision(label=1, confidence=0.8)]

    cm = confusion(decisions, [0, -1, 0], k=3)

    assert cm.open_set
    assert cm.counts == [[1, 1, 0], [0, 0, 0], [0, 0, 1]]
    with pytest.raises(LabelError):
        confusion(decisions, [0, 1, 0], k=2, open_set=False)


def test_evaluate_open_set():
    probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.55, 0.45], [0.6, 0.4]])

    evaluation = evaluate_probabilities(probs, [0, 1, -1, 1], "open", threshold=0.58, class_names=["a", "b"])

    assert evaluation.labels == ["a", "b", "U"]
    assert evaluation.confusion.counts == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]
    assert evaluation.metrics.accuracy == pytest.approx(0.75)
    assert [c.support for c in evaluation.per_class] == [1, 2, 1]


def test_evaluate_closed_set_rejects_unknown_truths():
    with pytest.raises(LabelError):
        evaluate_probabilities(np.array([[0.7, 0.3]]), [-1], "closed")
    with pytest.raises(DataError):
        evaluate_probabilities(np.array([[0.7, 0.3]]), [0, 1], "closed")


def test_per_class_names_must_match():
    with pytest.raises(LabelError):
        per_class_report(ConfusionMatrix(counts=[[1, 0], [0, 1]]), ["only"])


def test_threshold_sweep_trades_known_for_unknown():
    rng = np.random.default_rng(2)
    probs = rng.dirichlet(np.ones(3), size=80)
    truths = list(rng.integers(-1, 3, size=80))

    sweep = threshold_sweep(probs, truths, [0.3, 0.5, 0.7, 0.9])

    assert list(sweep["threshold"]) == [0.3, 0.5, 0.7, 0.9]
    assert sweep["unknown_recall"].is_monotonic_increasing
    assert sweep["known_retained"].is_monotonic_decreasing
    assert sweep["known_retained"].iloc[-1] <= sweep["known_retained"].iloc[0]


def test_report_and_predictions(tmp_path):
    probs = np.array([[0.9, 0.1], [0.3, 0.7]])
    evaluation = evaluate_probabilities(probs, [0, 0], "closed", class_names=["a", "b"])

    report = build_report(evaluation, {"arch": "cat"}, seed=4, extra={"baselines": {}})
    path = write_predictions(tmp_path / "predictions.csv", evaluation, ["x.wav", "y.wav"], {"seed": 4})

    assert report["seed"] == 4
    assert report["mode"] == "closed"
    assert report["threshold"] is None
    assert report["support"] == {"a": 2, "b": 0}
    assert report["metrics"]["accuracy"] == pytest.approx(0.5)
    frame, _ = read_csv(path)
    assert list(frame.columns) == PREDICTION_COLUMNS
    assert frame["prediction"].tolist() == ["a", "b"]
