"""Tests for Sim and MMR context ranking."""

import numpy as np
import pytest

from biopars.errors import DimensionError, EmbeddingError, ParameterError
from biopars.harness.ranking import rank_mmr, rank_sim

QUERY = [1.0, 1.0]
CONTEXTS = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]


def test_sim_orders_by_cosine_and_keeps_ties_stable():
    assert rank_sim([1.0, 0.0], [[0.0, 1.0], [1.0, 1.0], [2.0, 0.0]]) == [2, 1, 0]
    assert rank_sim(QUERY, CONTEXTS) == [0, 1, 2]


def test_mmr_skips_duplicates():
    assert rank_mmr(QUERY, CONTEXTS, lam=0.5) == [0, 2, 1]


def test_mmr_with_lambda_one_is_sim(rng):
    query, contexts = rng.normal(size=4), rng.normal(size=(6, 4))
    assert rank_mmr(query, contexts, lam=1.0) == rank_sim(query, contexts)


def test_mmr_k_limits_the_selection():
    assert rank_mmr(QUERY, CONTEXTS, k=2) == [0, 2]
    assert rank_mmr(QUERY, CONTEXTS, k=0) == []
    with pytest.raises(ParameterError):
        rank_mmr(QUERY, CONTEXTS, k=4)
    with pytest.raises(ParameterError):
        rank_mmr(QUERY, CONTEXTS, lam=1.5)


def test_bad_vectors():
    with pytest.raises(EmbeddingError):
        rank_sim([0.0, 0.0], CONTEXTS)
    with pytest.raises(DimensionError):
        rank_sim([1.0, 0.0, 0.0], CONTEXTS)
    assert rank_sim(QUERY, np.array([[0.0, 0.0], [1.0, 0.0]])) == [1, 0]
