"""Tests for chunked causal attention."""

import numpy as np
import pytest

from biopars.errors import DimensionError, ParameterError
from biopars.models.attention import (
    OpCounter,
    causal_mask,
    chunked_attention_backward,
    chunked_causal_attention,
    qk_affine,
)
from biopars.models.tensor import softmax_rows


def _dense_reference(q, k, v, c, causal):
    n = q.shape[0]
    out = np.zeros((n, v.shape[1]))
    for start in range(0, n, c):
        end = min(start + c, n)
        scores = q[start:end] @ k[start:end].T
        if causal:
            scores = np.where(causal_mask(end - start), scores, -np.inf)
        out[start:end] = softmax_rows(scores) @ v[start:end]
    return out


def test_matches_dense_reference(rng):
    q, k, v = rng.normal(size=(11, 3)), rng.normal(size=(11, 3)), rng.normal(size=(11, 5))
    for c in (1, 3, 4, 11, 20):
        for causal in (True, False):
            np.testing.assert_allclose(
                chunked_causal_attention(q, k, v, c, causal), _dense_reference(q, k, v, c, causal), rtol=1e-12, atol=1e-12
            )


def test_chunk_of_one_returns_values(rng):
    q, k, v = rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), rng.normal(size=(6, 3))
    assert np.array_equal(chunked_causal_attention(q, k, v, 1), v)


def test_first_token_of_each_chunk_copies_its_value(rng):
    q, k, v = rng.normal(size=(8, 2)), rng.normal(size=(8, 2)), rng.normal(size=(8, 3))
    out = chunked_causal_attention(q, k, v, 4)
    assert np.array_equal(out[0], v[0]) and np.array_equal(out[4], v[4])


def test_no_information_crosses_chunks(rng):
    q, k, v = rng.normal(size=(8, 2)), rng.normal(size=(8, 2)), rng.normal(size=(8, 3))
    out = chunked_causal_attention(q, k, v, 4, causal=False)
    v2 = v.copy()
    v2[4:] += 10.0
    out2 = chunked_causal_attention(q, k, v2, 4, causal=False)
    assert np.array_equal(out[:4], out2[:4])


def test_causal_mask_hides_later_keys_exactly(rng):
    q, k, v = rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    out = chunked_causal_attention(q, k, v, 4)
    k2, v2 = k.copy(), v.copy()
    k2[3] += 5.0
    v2[3] -= 5.0
    out2 = chunked_causal_attention(q, k2, v2, 4)
    assert np.array_equal(out[:3], out2[:3])


def test_input_validation(rng):
    q = rng.normal(size=(4, 2))
    with pytest.raises(ParameterError):
        chunked_causal_attention(q, q, q, 0)
    with pytest.raises(DimensionError):
        chunked_causal_attention(q, rng.normal(size=(4, 3)), q, 2)
    with pytest.raises(DimensionError):
        chunked_causal_attention(q, q, rng.normal(size=(5, 2)), 2)


def test_qk_affine():
    z = np.array([[0.6, 0.8]])
    q, k = qk_affine(z, np.array([2.0, 1.0]), np.array([0.0, 1.0]), np.ones(2), np.zeros(2))
    np.testing.assert_allclose(q, [[1.2, 1.8]])
    np.testing.assert_allclose(k, z)
    with pytest.raises(DimensionError):
        qk_affine(z, np.ones(3), np.ones(2), np.ones(2), np.ones(2))


def test_op_count_is_linear_in_sequence_length(rng):
    c, z, v = 4, 3, 5
    counts = []
    for n in (32, 64, 128, 256):
        counter = OpCounter()
        x = rng.normal(size=(n, z))
        chunked_causal_attention(x, x, rng.normal(size=(n, v)), c, counter=counter)
        counts.append(counter.multiply_adds)
    per_token = [count / n for count, n in zip(counts, (32, 64, 128, 256))]
    for value in per_token:
        assert abs(value - per_token[0]) <= 0.1 * per_token[0]
    assert counts[0] == (32 // c) * (c * c * z + c * v * c)


def test_backward_matches_central_differences(rng):
    n, z, vw, c = 6, 2, 3, 4
    q, k, v = rng.normal(size=(n, z)), rng.normal(size=(n, z)), rng.normal(size=(n, vw))
    w = rng.normal(size=(n, vw))
    g_q, g_k, g_v = chunked_attention_backward(q, k, v, c, True, w)
    step = 1e-6

    def loss(qq, kk, vv):
        return float(np.sum(w * chunked_causal_attention(qq, kk, vv, c)))

    for arr, grad, which in ((q, g_q, 0), (k, g_k, 1), (v, g_v, 2)):
        for index in np.ndindex(arr.shape):
            plus, minus = [q.copy(), k.copy(), v.copy()], [q.copy(), k.copy(), v.copy()]
            plus[which][index] += step
            minus[which][index] -= step
            numeric = (loss(*plus) - loss(*minus)) / (2 * step)
            np.testing.assert_allclose(grad[index], numeric, rtol=1e-5, atol=1e-7)
