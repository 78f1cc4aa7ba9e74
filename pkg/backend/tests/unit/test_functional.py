"""
Tests for the differentiable layer primitives: forward values and
finite-difference gradient checks.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.exceptions import BatchSizeError, ConfigurationError, DimensionError, EncodingError
from app.nn import Tape, Tensor, parameter
from app.nn import functional as F
from tests.gradcheck import check_gradients


# ---------------------------------------------------------------- forward

def test_output_size_formula():
    assert F.output_size(100, 5, 2, 3) == 51
    assert F.output_size(51, 3, 2, 1) == 26
    assert F.output_size(13, 4, 1, 0) == 10


@st.composite
def _window_geometry(draw, pool: bool = False):
    k = draw(st.integers(1, 7))
    padding = draw(st.integers(0, k // 2 if pool else 3))
    size = draw(st.integers(max(1, k - 2 * padding), 24))
    stride = draw(st.integers(1, 4))
    return size, k, stride, padding


@settings(max_examples=60, deadline=None)
@given(geometry=_window_geometry(), width=st.integers(1, 24), seed=st.integers(0, 1000))
def test_conv2d_shape_follows_output_size(geometry, width, seed):
    size, k, stride, padding = geometry
    width = max(width, k - 2 * padding)
    gen = np.random.default_rng(seed)
    x = Tensor(gen.normal(size=(2, 3, size, width)))
    kernels = Tensor(gen.normal(size=(4, 3, k, k)))

    out = F.conv2d(x, kernels, stride=stride, padding=padding)

    assert out.shape == (2, 4, (size + 2 * padding - k) // stride + 1, (width + 2 * padding - k) // stride + 1)


@settings(max_examples=60, deadline=None)
@given(geometry=_window_geometry(pool=True), seed=st.integers(0, 1000))
def test_maxpool2d_shape_follows_output_size(geometry, seed):
    size, k, stride, padding = geometry
    x = Tensor(np.random.default_rng(seed).normal(size=(1, 2, size, size)))

    out = F.maxpool2d(x, k, stride, padding)

    expected = (size + 2 * padding - k) // stride + 1
    assert out.shape == (1, 2, expected, expected)
    assert expected == F.output_size(size, k, stride, padding)


def test_sigmoid_is_stable_at_extremes():
    out = F.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data

    np.testing.assert_allclose(out, [0.0, 0.5, 1.0], atol=1e-12)
    assert np.all(np.isfinite(out))


def test_gelu_exact_values():
    out = F.gelu(Tensor(np.array([-1.0, 0.0, 1.0]))).data

    np.testing.assert_allclose(out, [-0.15865525393145707, 0.0, 0.8413447460685429], rtol=1e-10)


def test_softmax_rows_sum_to_one():
    s = F.softmax_rows(Tensor(np.array([[1.0, 2.0, 3.0], [1000.0, 1000.0, 1000.0]]))).data

    np.testing.assert_allclose(s.sum(axis=1), [1.0, 1.0])
    np.testing.assert_allclose(s[1], [1 / 3] * 3)


def test_conv2d_is_cross_correlation():
    x = Tensor(np.arange(9.0).reshape(1, 1, 3, 3))
    kernel = Tensor(np.array([[[[1.0, 0.0], [0.0, 0.0]]]]))
    out = F.conv2d(x, kernel).data

    np.testing.assert_array_equal(out[0, 0], [[0.0, 1.0], [3.0, 4.0]])


def test_conv2d_with_padding_and_stride():
    x = Tensor(np.ones((1, 1, 4, 4)))
    kernel = Tensor(np.ones((1, 1, 3, 3)))
    out = F.conv2d(x, kernel, stride=2, padding=1).data

    assert out.shape == (1, 1, 2, 2)
    np.testing.assert_array_equal(out[0, 0], [[4.0, 6.0], [6.0, 9.0]])


def test_conv2d_accepts_single_image():
    out = F.conv2d(Tensor(np.ones((2, 5, 5))), Tensor(np.ones((3, 2, 3, 3))))

    assert out.shape == (3, 3, 3)


def test_conv2d_rejects_empty_output_and_channel_mismatch():
    with pytest.raises(ConfigurationError):
        F.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))
    with pytest.raises(DimensionError):
        F.conv2d(Tensor(np.ones((1, 2, 5, 5))), Tensor(np.ones((1, 1, 3, 3))))


def test_maxpool_padded_cells_never_win():
    x = Tensor(-np.arange(1.0, 17.0).reshape(1, 1, 4, 4))
    out = F.maxpool2d(x, 3, 2, 1).data

    assert out.shape == (1, 1, 2, 2)
    assert np.all(out < 0)
    np.testing.assert_array_equal(out[0, 0], [[-1.0, -2.0], [-5.0, -6.0]])


def test_maxpool_gradient_goes_to_first_maximum():
    x = parameter(np.zeros((1, 1, 2, 2)))
    with Tape() as tape:
        loss = F.maxpool2d(x, 2, 2).sum()
    tape.backward(loss)

    np.testing.assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_maxpool_rejects_bad_window():
    with pytest.raises(ConfigurationError):
        F.maxpool2d(Tensor(np.ones((1, 1, 4, 4))), 2, 2, padding=2)
    with pytest.raises(ConfigurationError):
        F.maxpool2d(Tensor(np.ones((1, 1, 4, 4))), 2, 0)


def test_batchnorm_updates_running_statistics(rng):
    x = Tensor(rng.normal(3.0, 2.0, size=(64, 4)))
    mean, var = np.zeros(4), np.ones(4)
    out = F.batchnorm(x, parameter(np.ones(4)), parameter(np.zeros(4)), mean, var, training=True)

    np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(mean, 0.1 * x.data.mean(axis=0))
    np.testing.assert_allclose(var, 0.9 + 0.1 * x.data.var(axis=0))


def test_batchnorm_eval_uses_running_statistics():
    x = Tensor(np.array([[2.0], [4.0]]))
    out = F.batchnorm(
        x, parameter(np.ones(1)), parameter(np.zeros(1)), np.array([2.0]), np.array([4.0]), training=False
    )

    np.testing.assert_allclose(out.data[:, 0], [0.0, 2.0 / math.sqrt(4.0 + 1e-5)])


def test_batchnorm_single_row_in_training_raises():
    with pytest.raises(BatchSizeError):
        F.batchnorm(
            Tensor(np.ones((1, 3))), parameter(np.ones(3)), parameter(np.zeros(3)),
            np.zeros(3), np.ones(3), training=True,
        )


def test_layernorm_normalises_last_axis(rng):
    x = Tensor(rng.normal(0.0, 30.0, size=(5, 16)))
    out = F.layernorm(x, parameter(np.ones(16)), parameter(np.zeros(16))).data

    np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-10)
    np.testing.assert_allclose(out.var(axis=-1), 1.0, rtol=1e-6)


def test_dropout_is_identity_in_eval_and_scales_in_training():
    x = Tensor(np.ones((100, 100)))
    assert F.dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    out = F.dropout(x, 0.5, np.random.default_rng(0), training=True).data
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert 0.45 < (out > 0).mean() < 0.55


def test_one_hot_and_cross_entropy_value():
    target = F.one_hot(np.array([1, 0]))
    np.testing.assert_array_equal(target, [[0.0, 1.0], [1.0, 0.0]])

    loss = F.cross_entropy_loss(Tensor(np.zeros((2, 2))), target)
    assert loss.item() == pytest.approx(math.log(2.0))


def test_cross_entropy_rejects_invalid_one_hot():
    with pytest.raises(EncodingError):
        F.cross_entropy_loss(Tensor(np.zeros((2, 2))), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_mse_loss_value_and_shape_check():
    loss = F.mse_loss(Tensor(np.array([1.0, 3.0])), np.array([0.0, 1.0]))
    assert loss.item() == pytest.approx(2.5)

    with pytest.raises(DimensionError):
        F.mse_loss(Tensor(np.ones(2)), np.ones(3))


# -------------------------------------------------------------- gradients

def test_linear_gradients(rng):
    x = parameter(rng.normal(size=(5, 4)))
    w = parameter(rng.normal(size=(4, 3)))
    b = parameter(rng.normal(size=3))
    check_gradients(lambda: F.linear(x, w, b).mean(), [x, w, b])


@pytest.mark.parametrize("activation", [F.relu, F.gelu, F.sigmoid])
def test_activation_gradients(rng, activation):
    x = parameter(rng.normal(size=(6, 5)))
    weights = Tensor(rng.normal(size=(6, 5)))
    check_gradients(lambda: (activation(x) * weights).sum(), [x])


def test_softmax_gradients(rng):
    x = parameter(rng.normal(size=(4, 5)))
    weights = Tensor(rng.normal(size=(4, 5)))
    check_gradients(lambda: (F.softmax_rows(x) * weights).sum(), [x])


def test_layernorm_gradients(rng):
    x = parameter(rng.normal(size=(3, 4, 8)))
    gamma = parameter(rng.normal(size=8))
    beta = parameter(rng.normal(size=8))
    weights = Tensor(rng.normal(size=(3, 4, 8)))
    check_gradients(lambda: (F.layernorm(x, gamma, beta) * weights).sum(), [x, gamma, beta])


@pytest.mark.parametrize("shape", [(6, 3), (3, 2, 4, 4)])
def test_batchnorm_training_gradients(rng, shape):
    x = parameter(rng.normal(size=shape))
    gamma = parameter(rng.normal(size=shape[1]))
    beta = parameter(rng.normal(size=shape[1]))
    weights = Tensor(rng.normal(size=shape))
    mean, var = np.zeros(shape[1]), np.ones(shape[1])

    def loss():
        return (F.batchnorm(x, gamma, beta, mean, var, training=True) * weights).sum()

    check_gradients(loss, [x, gamma, beta])


def test_batchnorm_eval_gradients(rng):
    x = parameter(rng.normal(size=(4, 3)))
    gamma = parameter(rng.normal(size=3))
    beta = parameter(rng.normal(size=3))
    weights = Tensor(rng.normal(size=(4, 3)))
    mean, var = rng.normal(size=3), rng.uniform(0.5, 2.0, size=3)
    check_gradients(
        lambda: (F.batchnorm(x, gamma, beta, mean, var, training=False) * weights).sum(), [x, gamma, beta]
    )


@pytest.mark.parametrize(
    "kernel,stride,padding",
    [((3, 3), 1, 1), ((5, 5), 2, 3), ((1, 3), 1, (0, 1)), ((1, 1), 2, 0)],
)
def test_conv2d_gradients(rng, kernel, stride, padding):
    x = parameter(rng.normal(size=(2, 2, 7, 7)))
    k = parameter(rng.normal(size=(3, 2, *kernel)))
    b = parameter(rng.normal(size=3))
    out_shape = F.conv2d(x, k, b, stride=stride, padding=padding).shape
    weights = Tensor(rng.normal(size=out_shape))
    check_gradients(lambda: (F.conv2d(x, k, b, stride=stride, padding=padding) * weights).sum(), [x, k, b])


@pytest.mark.parametrize("k,stride,padding", [(3, 2, 1), (4, 1, 0), (2, 2, 0)])
def test_maxpool_gradients(rng, k, stride, padding):
    x = parameter(rng.normal(size=(2, 2, 8, 8)))
    out_shape = F.maxpool2d(x, k, stride, padding).shape
    weights = Tensor(rng.normal(size=out_shape))
    check_gradients(lambda: (F.maxpool2d(x, k, stride, padding) * weights).sum(), [x])


def test_mse_gradients(rng):
    pred = parameter(rng.normal(size=7))
    target = rng.integers(0, 2, size=7).astype(float)
    check_gradients(lambda: F.mse_loss(F.sigmoid(pred), target), [pred])


def test_cross_entropy_gradients(rng):
    logits = parameter(rng.normal(size=(6, 2)))
    target = F.one_hot(rng.integers(0, 2, size=6))
    check_gradients(lambda: F.cross_entropy_loss(logits, target), [logits])
