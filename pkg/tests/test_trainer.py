import numpy as np
import pytest

from app.artifacts import read_csv
from app.data import LabeledSet
from app.exceptions import ConfigError, DataError, LabelError
from app.models.config import MlpConfig
from app.train import calibrate_threshold, fit, train_config_for
from app.train.trainer import HISTORY_COLUMNS, write_history

SIDE = 8


def build_blocks(per_class=30, num_classes=3, seed=0, unknown=0):
    """Class c lights up rows 2c and 2c+1 of an 8x8 image; unknown samples light up the bottom two rows."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in list(range(num_classes)) * per_class + [-1] * unknown:
        img = 0.1 * rng.random((SIDE, SIDE))
        band = c if c >= 0 else SIDE - 1
        img[band * 2 % SIDE : band * 2 % SIDE + 2] += 0.8
        xs.append(img)
        ys.append(c)
    y = np.array(ys, dtype=np.int64)
    return LabeledSet(
        x=np.stack(xs).astype(np.float32),
        y=y,
        paths=[f"s{i}.wav" for i in range(len(y))],
        synthesizers=[f"c{c}" for c in ys],
        known=y >= 0,
        class_names=[f"c{c}" for c in range(num_classes)],
    )


def build_mlp_config(num_classes=3):
    return MlpConfig(hidden=(16, 16), num_classes=num_classes, input_size=SIDE)


def build_train_config(**overrides):
    values = dict(epochs=30, patience=30, batch_size=16, micro_batch_size=8, lr=0.01, seed=0)
    values.update(overrides)
    return train_config_for("mlp", **values)


def test_fit_learns_separable_classes():
    result = fit(build_mlp_config(), build_blocks(), build_train_config())

    best = result.history[result.best_epoch - 1]
    assert best.val_acc >= 0.75
    assert result.best_val_loss == pytest.approx(best.val_loss)
    assert result.history[-1].train_loss < result.history[0].train_loss
    assert 0.0 < result.threshold < 1.0
    assert [h.epoch for h in result.history] == list(range(1, len(result.history) + 1))


def test_fit_is_reproducible_for_a_seed():
    data = build_blocks()
    cfg = build_train_config(epochs=4, patience=4)

    first = fit(build_mlp_config(), data, cfg)
    second = fit(build_mlp_config(), data, cfg)

    assert first.history == second.history
    assert first.threshold == second.threshold
    for name, tensor in first.model.params.items():
        np.testing.assert_array_equal(tensor.data, second.model.params[name].data)


def test_fit_ignores_unknown_rows():
    with_unknown = fit(build_mlp_config(), build_blocks(unknown=10), build_train_config(epochs=2, patience=2))
    without = fit(build_mlp_config(), build_blocks(), build_train_config(epochs=2, patience=2))

    assert with_unknown.history == without.history


def test_fit_stops_early_and_restores_best_epoch():
    result = fit(build_mlp_config(), build_blocks(), build_train_config(epochs=40, patience=1, lr=0.5))

    assert result.history[result.best_epoch - 1].val_loss == min(h.val_loss for h in result.history)
    if not result.stopped_early:
        assert len(result.history) == 40


def test_fit_rejects_degenerate_data():
    one_class = build_blocks(num_classes=3)
    one_class.y[:] = 0
    with pytest.raises(LabelError):
        fit(build_mlp_config(), one_class, build_train_config(epochs=1, patience=1))

    tiny = build_blocks(per_class=1, num_classes=2)
    with pytest.raises(DataError):
        fit(build_mlp_config(num_classes=2), tiny, build_train_config(epochs=1, patience=1))

    out_of_range = build_blocks()
    with pytest.raises(LabelError):
        fit(build_mlp_config(num_classes=2), out_of_range, build_train_config(epochs=1, patience=1))


def test_train_config_layers_overrides():
    cfg = train_config_for("cat", lr=5e-4, epochs=3, patience=2)

    assert cfg.lr == 5e-4
    assert cfg.weight_decay == 1e-4
    assert cfg.loss.kind.value == "poly1ce" and cfg.loss.epsilon == 3.3
    assert train_config_for("cnn").optimizer.value == "adam"
    assert train_config_for("mlp").batch_size == 200

    with pytest.raises(ConfigError):
        train_config_for("mlp", epochs=2, patience=5)
    with pytest.raises(ConfigError):
        train_config_for("mlp", validation_fraction=0.7)


@pytest.mark.parametrize("target", [0.5, 0.9, 0.95, 1.0])
def test_calibrated_threshold_keeps_target_share(target):
    probs = np.random.default_rng(3).uniform(0.3, 1.0, size=101)

    threshold = calibrate_threshold(probs, target)

    assert np.mean(probs > threshold) >= target
    # any larger T drops below the target
    assert np.mean(probs > np.sort(probs)[int(np.floor((1 - target) * 101))]) < target


def test_calibrated_threshold_edges():
    assert calibrate_threshold(np.ones(10), 0.95) == 1.0 - 1e-6
    with pytest.raises(DataError):
        calibrate_threshold(np.array([]), 0.95)


def test_write_history(tmp_path):
    result = fit(build_mlp_config(), build_blocks(), build_train_config(epochs=2, patience=2))

    path = write_history(tmp_path / "history.csv", result.history, {"seed": 0})

    frame, stamp = read_csv(path)
    assert list(frame.columns) == HISTORY_COLUMNS
    assert frame["epoch"].tolist() == [1, 2]
    assert stamp == {"seed": 0}
