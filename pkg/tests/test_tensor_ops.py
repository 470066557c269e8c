import math

import numpy as np
import pytest

from app.exceptions import ConfigError, InvalidArgumentError, ShapeError
from app.tensor import (
    Tensor,
    backward,
    conv2d,
    drop_path,
    dropout,
    gelu,
    grad_check,
    layer_norm,
    maxpool2d,
    multi_head_attention,
    no_grad,
    relu,
    sequence_pool,
    sigmoid,
    softmax,
)
from app.tensor import ops
from app.tensor.nn import ATTENTION_KEYS
from app.tensor.random import philox

STEP = 1e-5
ELEMENTWISE_TOL = 1e-6
COMPOSITE_TOL = 1e-5
# grad_check at its own step, where curved maps carry O(h^2) truncation error
DEFAULT_STEP_TOL = 1e-4


def rand(shape, low=-1.0, high=1.0, seed=0):
    return Tensor(np.random.default_rng(seed).uniform(low, high, shape), dtype=np.float64)


def weighted(fn, out_shape, seed=1):
    """Scalar sum(W * fn(x)) with fixed weights bounded away from zero."""
    w = np.random.default_rng(seed).uniform(0.5, 1.5, out_shape)
    return lambda x: ops.sum(ops.mul(fn(x), Tensor(w, dtype=np.float64)))


def attention_params(d, seed=2):
    rng = np.random.default_rng(seed)
    return {
        key: Tensor(rng.normal(0, 0.5, (d, d) if key.startswith("w") else (d,)), dtype=np.float64)
        for key in ATTENTION_KEYS
    }


@pytest.mark.parametrize(
    "fn,low,high",
    [
        (lambda x: ops.exp(x), -1.0, 1.0),
        (lambda x: ops.log(x), 0.5, 2.0),
        (lambda x: ops.power(x, 3.0), 0.5, 2.0),
        (lambda x: ops.power(x, 0.5), 0.5, 2.0),
        (lambda x: ops.mul(x, x), 0.5, 2.0),
        (lambda x: ops.add(x, 3.0), -1.0, 1.0),
        (lambda x: ops.sub(2.0, x), -1.0, 1.0),
        (lambda x: ops.neg(x), -1.0, 1.0),
        (lambda x: ops.div(x, 4.0), -1.0, 1.0),
        (lambda x: ops.clip(x, -5.0, 5.0), -1.0, 1.0),
        (lambda x: sigmoid(x), -2.0, 2.0),
        (lambda x: gelu(x), 0.5, 2.0),
        (lambda x: relu(x), 0.2, 2.0),
    ],
)
def test_elementwise_gradients(fn, low, high):
    x = rand((3, 4), low, high)

    assert grad_check(weighted(fn, (3, 4)), x, STEP) < ELEMENTWISE_TOL


def test_reduction_and_shape_gradients():
    x = rand((2, 3, 4))

    assert grad_check(weighted(lambda t: ops.sum(t, axis=1), (2, 4)), x, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.mean(t, axis=-1), (2, 3)), x, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.reshape(t, (6, 4)), (6, 4)), x, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.transpose(t, (2, 0, 1)), (4, 2, 3)), x, STEP) < ELEMENTWISE_TOL


def test_matmul_and_dense_gradients():
    a = rand((2, 3, 4), seed=3)
    b = rand((4, 5), seed=4)
    bias = rand((5,), seed=5)

    assert grad_check(weighted(lambda t: ops.matmul(t, b), (2, 3, 5)), a, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.matmul(a, t), (2, 3, 5)), b, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.dense(a, t, bias), (2, 3, 5)), b, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.dense(t, b, bias), (2, 3, 5)), a, STEP) < ELEMENTWISE_TOL


def test_softmax_gradient():
    x = rand((3, 5), -2.0, 2.0)

    assert grad_check(weighted(lambda t: softmax(t, axis=-1), (3, 5)), x, STEP) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: softmax(t, axis=0), (3, 5)), x, STEP) < ELEMENTWISE_TOL


def test_pick_gradient():
    x = rand((4, 3), 0.1, 1.0)
    index = [0, 2, 1, 2]

    assert grad_check(weighted(lambda t: ops.pick(t, index), (4,)), x, STEP) < ELEMENTWISE_TOL


def test_layer_norm_gradient():
    x = rand((2, 3, 6), seed=6)
    gain = rand((6,), 0.5, 1.5, seed=7)
    bias = rand((6,), seed=8)

    assert grad_check(weighted(lambda t: layer_norm(t, gain, bias), (2, 3, 6)), x, STEP) < COMPOSITE_TOL
    assert grad_check(weighted(lambda g: layer_norm(x, g, bias), (2, 3, 6)), gain, STEP) < COMPOSITE_TOL


def test_conv2d_gradients():
    x = rand((2, 2, 5, 5), seed=9)
    kernel = rand((3, 2, 3, 3), seed=10)
    bias = rand((3,), seed=11)

    assert grad_check(weighted(lambda t: conv2d(t, kernel, bias), (2, 3, 5, 5)), x, STEP) < COMPOSITE_TOL
    assert grad_check(weighted(lambda k: conv2d(x, k, bias), (2, 3, 5, 5)), kernel, STEP) < COMPOSITE_TOL
    single = Tensor(x.data[0], dtype=np.float64)
    assert grad_check(weighted(lambda t: conv2d(t, kernel, bias), (3, 5, 5)), single, STEP) < COMPOSITE_TOL


def test_maxpool_gradient_routes_to_maximum():
    # distinct values spaced well above the finite-difference step
    values = np.random.default_rng(12).permutation(32).reshape(2, 4, 4) / 10.0
    x = Tensor(values, dtype=np.float64)

    assert grad_check(weighted(lambda t: maxpool2d(t), (2, 2, 2)), x, STEP) < ELEMENTWISE_TOL


def test_attention_and_pooling_gradients():
    x = rand((2, 3, 4), seed=13)
    params = attention_params(4)
    u = rand((4, 1), seed=14)

    assert grad_check(weighted(lambda t: multi_head_attention(t, params, heads=2), (2, 3, 4)), x, STEP) < COMPOSITE_TOL
    assert grad_check(weighted(lambda t: sequence_pool(t, u), (2, 4)), x, STEP) < COMPOSITE_TOL
    assert grad_check(weighted(lambda v: sequence_pool(x, v), (2, 4)), u, STEP) < COMPOSITE_TOL


def test_unbatched_attention_matches_batched_row():
    x = rand((2, 3, 4), seed=15)
    params = attention_params(4)

    batched = multi_head_attention(x, params, heads=2).data
    single = multi_head_attention(Tensor(x.data[1], dtype=np.float64), params, heads=2).data

    np.testing.assert_allclose(single, batched[1], atol=1e-12)


def test_gelu_matches_erf_oracle():
    xs = np.linspace(-3, 3, 13)
    out = gelu(Tensor(xs, dtype=np.float64)).data

    expected = [x * 0.5 * (1 + math.erf(x / math.sqrt(2))) for x in xs]
    assert out == pytest.approx(expected, abs=1e-12)


def test_softmax_rows_sum_to_one_for_large_logits():
    out = softmax(Tensor(np.array([[1000.0, 1000.0, -1000.0]]), dtype=np.float64)).data

    assert out.sum() == pytest.approx(1.0)
    assert out[0, :2] == pytest.approx([0.5, 0.5])


def test_backward_accumulates_into_shared_leaf():
    x = Tensor(np.array([2.0, 3.0]), requires_grad=True, dtype=np.float64)

    backward(ops.sum(ops.add(ops.mul(x, x), x)))

    assert x.grad.tolist() == [5.0, 7.0]


def test_backward_requires_scalar_connected_loss():
    x = Tensor(np.ones(3), requires_grad=True, dtype=np.float64)

    with pytest.raises(InvalidArgumentError):
        backward(ops.mul(x, 2.0))
    with pytest.raises(InvalidArgumentError):
        backward(Tensor(1.0))


def test_no_grad_skips_graph():
    x = Tensor(np.ones(3), requires_grad=True, dtype=np.float64)

    with no_grad():
        y = ops.sum(ops.mul(x, 2.0))

    assert not y.requires_grad
    assert y.is_leaf


def test_shape_errors():
    with pytest.raises(ShapeError):
        ops.matmul(rand((2, 3)), rand((4, 2)))
    with pytest.raises(ShapeError):
        ops.dense(rand((2, 3)), rand((4, 2)))
    with pytest.raises(ShapeError):
        maxpool2d(rand((3, 5)))
    with pytest.raises(ShapeError):
        sequence_pool(rand((3, 4)), rand((3, 1)))
    with pytest.raises(ConfigError):
        multi_head_attention(rand((3, 5)), attention_params(5), heads=2)


def test_dropout_scales_survivors_and_is_identity_in_eval():
    x = Tensor(np.ones((200, 50)), dtype=np.float64)

    assert dropout(x, 0.5, training=False, rng=None) is x
    out = dropout(x, 0.5, training=True, rng=philox(0, 3)).data
    assert set(np.unique(out).tolist()) <= {0.0, 2.0}
    assert out.mean() == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ConfigError):
        dropout(x, 1.0, training=True, rng=philox(0, 3))


def test_drop_path_drops_whole_samples():
    x = Tensor(np.ones((64, 4, 3)), dtype=np.float64)

    out = drop_path(x, 0.25, training=True, rng=philox(1, 3)).data

    per_sample = out.reshape(64, -1)
    assert np.all(per_sample.min(axis=1) == per_sample.max(axis=1))
    assert set(np.unique(out).tolist()) <= {0.0, 1.0 / 0.75}


def test_conv2d_of_ones_counts_in_bounds_neighbours():
    x = Tensor(np.ones((1, 3, 3)), dtype=np.float64)
    kernel = Tensor(np.ones((1, 1, 3, 3)), dtype=np.float64)
    bias = Tensor(np.zeros(1), dtype=np.float64)

    out = conv2d(x, kernel, bias).data[0]

    assert out.tolist() == [[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]]


def test_maxpool_of_ramp():
    x = Tensor(np.arange(16.0).reshape(4, 4), dtype=np.float64)

    assert maxpool2d(x).data.tolist() == [[5.0, 7.0], [13.0, 15.0]]


def test_maxpool_tie_sends_gradient_to_first_cell():
    x = Tensor(np.ones((2, 2)), requires_grad=True, dtype=np.float64)

    backward(ops.sum(maxpool2d(x)))

    assert x.grad.tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_softmax_values_and_shift_invariance():
    v = np.array([math.log(2.0), 0.0])

    out = softmax(Tensor(v, dtype=np.float64)).data
    shifted = softmax(Tensor(v + 100.0, dtype=np.float64)).data

    assert out == pytest.approx([2 / 3, 1 / 3], abs=1e-12)
    np.testing.assert_allclose(shifted, out, atol=1e-12)


def test_sequence_pool_with_zero_query_is_the_mean():
    x = rand((5, 4), seed=16)

    out = sequence_pool(x, Tensor(np.zeros((4, 1)), dtype=np.float64)).data

    np.testing.assert_allclose(out, x.data.mean(axis=0), atol=1e-12)


def test_attention_is_permutation_equivariant():
    x = rand((5, 4), seed=17)
    params = attention_params(4)
    perm = [3, 0, 4, 1, 2]

    out = multi_head_attention(x, params, heads=2).data
    permuted = multi_head_attention(Tensor(x.data[perm], dtype=np.float64), params, heads=2).data

    np.testing.assert_allclose(permuted, out[perm], atol=1e-12)


def test_attention_over_one_token_is_value_then_output_projection():
    x = rand((1, 4), seed=18)
    params = attention_params(4)
    p = {key: t.data for key, t in params.items()}

    out = multi_head_attention(x, params, heads=2).data

    expected = (x.data @ p["wv"] + p["bv"]) @ p["wo"] + p["bo"]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_gradients_at_default_step():
    x = rand((2, 2, 5, 5), seed=9)
    kernel = rand((3, 2, 3, 3), seed=10)
    bias = rand((3,), seed=11)
    a = rand((2, 3, 4), seed=3)
    b = rand((4, 5), seed=4)
    dense_bias = rand((5,), seed=5)

    # linear in the checked input, so only rounding separates the two gradients
    assert grad_check(weighted(lambda t: conv2d(t, kernel, bias), (2, 3, 5, 5)), x) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda k: conv2d(x, k, bias), (2, 3, 5, 5)), kernel) < ELEMENTWISE_TOL
    assert grad_check(weighted(lambda t: ops.dense(t, b, dense_bias), (2, 3, 5)), a) < ELEMENTWISE_TOL

    tokens = rand((2, 3, 6), seed=6)
    gain = rand((6,), 0.5, 1.5, seed=7)
    ln_bias = rand((6,), seed=8)
    assert grad_check(weighted(lambda t: layer_norm(t, gain, ln_bias), (2, 3, 6)), tokens) < DEFAULT_STEP_TOL
    params = attention_params(4)
    assert grad_check(weighted(lambda t: multi_head_attention(t, params, heads=2), (2, 3, 4)), a) < DEFAULT_STEP_TOL
