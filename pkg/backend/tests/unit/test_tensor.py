"""
Tests for the autodiff tensor and tape.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.exceptions import DimensionError, NumericalError, TapeError
from app.nn import Tape, Tensor, concat, parameter
from app.nn.tensor import _unbroadcast, current_tape
from tests.gradcheck import check_gradients


def test_add_mul_gradients_match_hand_derivation():
    a = parameter(np.array([1.0, 2.0, 3.0]))
    b = parameter(np.array([4.0, 5.0, 6.0]))
    with Tape() as tape:
        loss = (a * b + a).sum()
    tape.backward(loss)

    np.testing.assert_array_equal(a.grad, [5.0, 6.0, 7.0])
    np.testing.assert_array_equal(b.grad, [1.0, 2.0, 3.0])


def test_broadcast_gradient_is_summed_back_to_operand_shape():
    x = parameter(np.ones((4, 3)))
    bias = parameter(np.zeros(3))
    with Tape() as tape:
        loss = (x + bias).sum()
    tape.backward(loss)

    assert bias.grad.shape == (3,)
    np.testing.assert_array_equal(bias.grad, [4.0, 4.0, 4.0])


def test_matmul_reshape_transpose_gradients(rng):
    a = parameter(rng.normal(size=(3, 4)))
    b = parameter(rng.normal(size=(2, 6)))

    def loss():
        return ((a @ b.reshape(4, 3).T.T.reshape(3, 4).transpose(1, 0)) * 0.5).mean()

    check_gradients(loss, [a, b], samples=20)


def test_getitem_routes_gradient_to_selected_entries():
    x = parameter(np.arange(6.0).reshape(2, 3))
    with Tape() as tape:
        loss = x[:, 1].sum()
    tape.backward(loss)

    np.testing.assert_array_equal(x.grad, [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])


def test_concat_splits_gradient():
    a = parameter(np.ones((2, 1)))
    b = parameter(np.ones((2, 2)))
    with Tape() as tape:
        out = concat([a, b], axis=1)
        loss = (out * Tensor(np.array([[1.0, 2.0, 3.0]]))).sum()
    tape.backward(loss)

    np.testing.assert_array_equal(a.grad, [[1.0], [1.0]])
    np.testing.assert_array_equal(b.grad, [[2.0, 3.0], [2.0, 3.0]])


def test_concat_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        concat([Tensor(np.ones((2, 1))), Tensor(np.ones((3, 1)))], axis=1)


def test_mean_over_axis_gradient():
    x = parameter(np.ones((2, 5)))
    with Tape() as tape:
        loss = x.mean(axis=1).sum()
    tape.backward(loss)

    np.testing.assert_allclose(x.grad, np.full((2, 5), 0.2))


def test_non_scalar_loss_rejected():
    x = parameter(np.ones(3))
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(TapeError):
        tape.backward(y)


def test_detached_loss_rejected():
    x = parameter(np.ones(3))
    with Tape():
        loss = x.sum()
    with Tape() as other:
        pass
    with pytest.raises(TapeError):
        other.backward(loss)


def test_second_backward_needs_reset():
    x = parameter(np.ones(3))
    with Tape() as tape:
        loss = (x * x).sum()
    tape.backward(loss)
    with pytest.raises(TapeError):
        tape.backward(loss)

    tape.reset()
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [4.0, 4.0, 4.0])


def test_no_tape_builds_no_graph():
    x = parameter(np.ones(3))
    y = (x * 3.0).sum()

    assert current_tape() is None
    assert not y.requires_grad
    assert y._backward is None


def test_tape_records_only_differentiable_ops():
    x = parameter(np.ones(2))
    constant = Tensor(np.ones(2))
    with Tape() as tape:
        (constant * 2.0).sum()
        (x * 2.0).sum()

    assert len(tape) == 2


def test_non_finite_forward_raises_numerical_error():
    x = Tensor(np.array([1.0, np.inf]))
    with pytest.raises(NumericalError):
        x * 2.0


def test_item_requires_single_element():
    with pytest.raises(DimensionError):
        Tensor(np.ones(2)).item()


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 4),
    cols=st.integers(1, 4),
    keep_rows=st.booleans(),
    keep_cols=st.booleans(),
)
def test_unbroadcast_restores_operand_shape(rows, cols, keep_rows, keep_cols):
    shape = (rows if keep_rows else 1, cols if keep_cols else 1)
    grad = np.ones((3, rows, cols))
    reduced = _unbroadcast(grad, shape)

    assert reduced.shape == shape
    assert reduced.sum() == pytest.approx(grad.sum())
