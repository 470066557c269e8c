import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import ConfigError, ShapeError
from app.models import CatConfig, CnnConfig, MlpConfig, build_model, cat_forward, param_count, predict
from app.models.base import as_image_batch
from app.models.cat import drop_path_schedule
from app.schema import ArchKind
from app.tensor import Tensor, grad_check, ops
from app.tensor.random import philox

REPORTED_PARAMS = 405_000


def tiny_cat_config(**overrides) -> CatConfig:
    values = dict(conv_channels=(2, 4), embed_dim=4, num_layers=1, num_heads=2, num_classes=3, input_size=8)
    values.update(overrides)
    return CatConfig(**values)


def batch(n=3, side=8, seed=0) -> np.ndarray:
    return np.random.default_rng(seed).random((n, side, side))


def test_default_cat_parameter_count():
    cfg = CatConfig()
    model = build_model(ArchKind.CAT, cfg)

    assert param_count(cfg) == 471_944
    assert model.param_count() == param_count(cfg)
    assert abs(param_count(cfg) - REPORTED_PARAMS) <= 0.25 * REPORTED_PARAMS


def test_extra_class_adds_one_head_column():
    d = CatConfig().embed_dim

    assert param_count(CatConfig(num_classes=9)) - param_count(CatConfig(num_classes=8)) == d + 1


def test_projection_added_when_widths_differ():
    with_proj = build_model(ArchKind.CAT, tiny_cat_config(conv_channels=(2, 6)))
    without = build_model(ArchKind.CAT, tiny_cat_config())

    assert "proj.w" in with_proj.params and "proj.w" not in without.params
    assert with_proj.param_count() == param_count(tiny_cat_config(conv_channels=(2, 6)))


def test_cat_config_validation():
    with pytest.raises(ValidationError):
        CatConfig(embed_dim=5, num_heads=2)
    with pytest.raises(ValidationError):
        CatConfig(input_size=10)


def test_cat_forward_shapes_and_probabilities():
    cfg = tiny_cat_config()
    model = build_model(ArchKind.CAT, cfg, seed=1)

    out = model(batch())

    assert out.logits.shape == (3, 3)
    assert out.latent.shape == (3, cfg.embed_dim)
    np.testing.assert_allclose(out.probabilities.data.sum(axis=1), 1.0, rtol=1e-5)
    assert len(out.probability_sets()) == 3


def test_full_cat_gradient_check():
    cfg = tiny_cat_config()
    model = build_model(ArchKind.CAT, cfg, seed=2, dtype=np.float64)
    rng = np.random.default_rng(11)
    # weights at unit scale
    for p in model.params.values():
        p.data = rng.normal(0.0, 0.5, p.shape)
    x = batch(2, seed=3)
    w = Tensor(np.random.default_rng(4).uniform(0.5, 1.5, (2, cfg.num_classes)), dtype=np.float64)

    def loss_of(name):
        def f(t):
            params = dict(model.params)
            params[name] = t
            out = cat_forward(x, cfg, params)
            return ops.sum(ops.mul(out.probabilities, w))

        return f

    for name in ("pos_embed", "blocks.0.fc1.w", "pool.u", "head.w"):
        assert grad_check(loss_of(name), model.params[name], 1e-5) < 1e-4, name


def test_build_model_is_seeded():
    a = build_model(ArchKind.CAT, tiny_cat_config(), seed=5)
    b = build_model(ArchKind.CAT, tiny_cat_config(), seed=5)
    c = build_model(ArchKind.CAT, tiny_cat_config(), seed=6)

    assert all(np.array_equal(a.params[k].data, b.params[k].data) for k in a.params)
    assert not np.array_equal(a.params["head.w"].data, c.params["head.w"].data)


def test_build_model_rejects_mismatched_config():
    with pytest.raises(ConfigError):
        build_model(ArchKind.CNN, tiny_cat_config())
    with pytest.raises(ConfigError):
        build_model(ArchKind.CAT, {"embed_dim": 3, "num_heads": 2})


def test_training_mode_uses_dropout():
    model = build_model(ArchKind.CAT, tiny_cat_config(dropout=0.5), seed=7)
    x = batch(seed=8)

    eval_a = model(x).probabilities.data
    eval_b = model(x).probabilities.data
    train = model(x, training=True, rng=philox(0, 3)).probabilities.data

    np.testing.assert_array_equal(eval_a, eval_b)
    assert not np.allclose(train, eval_a)


def test_drop_path_schedule_is_linear():
    assert drop_path_schedule(CatConfig(num_layers=3, drop_path_rate=0.2)) == pytest.approx([0.0, 0.1, 0.2])
    assert drop_path_schedule(CatConfig(num_layers=1)) == pytest.approx([0.1])


def test_image_batch_shape_checks():
    assert as_image_batch(np.zeros((8, 8)), 8, np.float32).shape == (1, 1, 8, 8)
    assert as_image_batch(np.zeros((2, 8, 8)), 8, np.float32).shape == (2, 1, 8, 8)
    with pytest.raises(ShapeError):
        as_image_batch(np.zeros((2, 6, 6)), 8, np.float32)


def test_cnn_and_mlp_forward():
    cnn = build_model(ArchKind.CNN, CnnConfig(conv_channels=(2, 3), dense_units=5, num_classes=4, input_size=8))
    mlp = build_model(ArchKind.MLP, MlpConfig(hidden=(6, 5), num_classes=4, input_size=8))
    x = batch(2)

    cnn_out = cnn(x)
    mlp_out = mlp(x)

    assert cnn_out.probabilities.shape == (2, 4) and cnn_out.latent.shape == (2, 5)
    assert mlp_out.probabilities.shape == (2, 4) and mlp_out.latent.shape == (2, 5)
    assert np.all((mlp_out.latent.data > 0) & (mlp_out.latent.data < 1))
    assert mlp.param_count() == 64 * 6 + 6 + 6 * 5 + 5 + 5 * 4 + 4


def test_predict_matches_single_forward_across_chunks():
    model = build_model(ArchKind.CAT, tiny_cat_config(), seed=9)
    x = batch(7, seed=10)

    whole = model(x)
    pred = predict(model, x, batch_size=3, threads=2)

    np.testing.assert_allclose(pred.probabilities, whole.probabilities.data, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(pred.latent, whole.latent.data, rtol=1e-5, atol=1e-6)
    assert len(pred) == 7
    assert len(predict(model, x[:0])) == 0


def test_zero_head_gives_uniform_probabilities():
    cfg = tiny_cat_config()
    model = build_model(ArchKind.CAT, cfg, seed=12, dtype=np.float64)
    params = dict(model.params)
    params["head.w"] = Tensor(np.zeros((cfg.embed_dim, cfg.num_classes)), dtype=np.float64)
    params["head.b"] = Tensor(np.zeros(cfg.num_classes), dtype=np.float64)

    out = cat_forward(batch(seed=13), cfg, params)

    np.testing.assert_allclose(out.probabilities.data, 1.0 / cfg.num_classes, atol=1e-12)


def test_latent_does_not_depend_on_head():
    cfg = tiny_cat_config()
    model = build_model(ArchKind.CAT, cfg, seed=14)
    x = batch(seed=15)
    params = dict(model.params)
    params["head.w"] = Tensor(np.ones((cfg.embed_dim, cfg.num_classes)), dtype=np.float32)

    np.testing.assert_array_equal(cat_forward(x, cfg, params).latent.data, model(x).latent.data)


def test_training_equals_inference_without_drop_rates():
    model = build_model(ArchKind.CAT, tiny_cat_config(dropout=0.0, drop_path_rate=0.0), seed=16)
    x = batch(seed=17)

    train = model(x, training=True, rng=philox(0, 3))
    infer = model(x)

    np.testing.assert_array_equal(train.logits.data, infer.logits.data)
    np.testing.assert_array_equal(train.latent.data, infer.latent.data)


def test_wider_embedding_has_more_parameters():
    assert param_count(CatConfig(embed_dim=256)) > param_count(CatConfig())
    assert param_count(tiny_cat_config(embed_dim=8)) > param_count(tiny_cat_config())
