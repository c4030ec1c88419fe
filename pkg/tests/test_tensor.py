"""Tests for the dense tensor substrate."""

import numpy as np
import pytest

from biopars.errors import DimensionError, ParameterError
from biopars.models.tensor import (
    ComplexTensor,
    Rng,
    as_tensor,
    l2_normalize_rows,
    matmul,
    sigmoid,
    softmax_rows,
    sum_last,
    swish,
)


def test_as_tensor_checks_rank_and_finiteness():
    assert as_tensor([[1, 2]]).dtype == np.float64
    with pytest.raises(DimensionError):
        as_tensor(np.zeros((1, 1, 1, 1)))
    with pytest.raises(ParameterError):
        as_tensor([1.0, np.nan])


def test_matmul_matches_numpy_and_rejects_bad_shapes(rng):
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(3, 4))
    np.testing.assert_allclose(matmul(a, b), a @ b, rtol=1e-12, atol=1e-12)
    with pytest.raises(DimensionError):
        matmul(a, a)


def test_matmul_rows_do_not_depend_on_other_rows(rng):
    a, b = rng.normal(size=(7, 5)), rng.normal(size=(5, 3))
    full = matmul(a, b)
    for i in range(7):
        assert np.array_equal(matmul(a[i : i + 1], b)[0], full[i])


def test_sum_last_is_left_to_right():
    a = np.array([[1e16, 1.0, -1e16]])
    assert sum_last(a)[0] == (1e16 + 1.0) - 1e16


def test_softmax_rows_sum_to_one_and_handle_masked_entries():
    scores = np.array([[0.0, 1.0, -np.inf], [1000.0, 1000.0, 1000.0]])
    probs = softmax_rows(scores)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert probs[0, 2] == 0.0
    np.testing.assert_allclose(probs[1], 1.0 / 3.0)


def test_l2_normalize_rows_unit_norm_and_zero_row():
    x = np.array([[3.0, 4.0], [0.0, 0.0]])
    y = l2_normalize_rows(x)
    np.testing.assert_allclose(y[0], [0.6, 0.8])
    assert np.array_equal(y[1], [0.0, 0.0])


def test_sigmoid_is_stable_for_large_inputs():
    y = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_allclose(y, [0.0, 0.5, 1.0])
    assert np.all(np.isfinite(swish(np.array([-1000.0, 1000.0]))))


def test_rng_is_reproducible_and_children_differ():
    a, b = Rng(7), Rng(7)
    assert np.array_equal(a.normal(5), b.normal(5))
    assert not np.array_equal(Rng(7).child(0).normal(5), Rng(7).child(1).normal(5))


def test_complex_tensor_round_trip_and_shape_check():
    z = np.array([1 + 2j, -3j])
    c = ComplexTensor.from_numpy(z)
    assert np.array_equal(c.to_numpy(), z)
    assert not c.is_real()
    assert ComplexTensor.real([1.0, 2.0]).is_real()
    with pytest.raises(DimensionError):
        ComplexTensor(np.zeros(2), np.zeros(3))
