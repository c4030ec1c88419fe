"""Tests for MoverScore and the mover's distance variants."""

import numpy as np
import pytest

from biopars.errors import DomainError, EmbeddingError, ParameterError
from biopars.metrics.embeddings import EmbeddedText, HashEmbedder
from biopars.metrics.idf import build_idf
from biopars.metrics.moverscore import MoverScoreResult, moverscore, ngram_embed, power_mean, wmd_variant


def _text(tokens, vectors):
    return EmbeddedText(tuple(tokens), np.asarray(vectors, dtype=np.float64)[:, None, :])


def test_power_mean():
    layers = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(power_mean(layers, 1), [2.0, 3.0])
    np.testing.assert_allclose(power_mean(layers, 2), [5.0, 10.0])
    np.testing.assert_allclose(power_mean(np.array([[-1.0, 2.0]]), 0.5), [-1.0, 2.0])
    with pytest.raises(DomainError):
        power_mean(np.array([[-1.0], [1.0]]), 0.5)


def test_identical_texts_have_zero_cost():
    text = HashEmbedder().embed("fever and cough persist")
    for n in (1, 2):
        result = moverscore(text, text, n=n)
        assert result.cost == pytest.approx(0.0, abs=1e-12)
        assert result.score == pytest.approx(1.0)


def test_two_points_by_hand():
    cand = _text(["a"], [[0.0, 0.0]])
    ref = _text(["b", "c"], [[3.0, 4.0], [0.0, 1.0]])
    result = moverscore(cand, ref)
    assert result.cost == pytest.approx(0.5 * 5.0 + 0.5 * 1.0)
    assert result == MoverScoreResult.from_cost(result.cost)
    assert wmd_variant(cand, ref, "sentence") == pytest.approx(np.hypot(1.5, 2.5))


def test_ngram_embed_weights():
    text = _text(["a", "b", "c"], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    emb, mass = ngram_embed(text, n=2)
    np.testing.assert_allclose(emb, [[1.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(mass, [0.5, 0.5])
    idf = build_idf(["a b", "a c", "a"])
    _, weighted = ngram_embed(text, idf, n=1)
    assert weighted[0] == 0.0
    np.testing.assert_allclose(weighted.sum(), 1.0)
    with pytest.raises(EmbeddingError):
        ngram_embed(text, n=4)
    with pytest.raises(ParameterError):
        ngram_embed(text, n=0)


def test_all_zero_idf_mass_is_an_error():
    text = _text(["a"], [[1.0, 0.0]])
    with pytest.raises(EmbeddingError):
        moverscore(text, text, idf_cand=build_idf(["a"]))


def test_variants_agree_with_moverscore():
    embedder = HashEmbedder(layers=2, width=6)
    cand, ref = embedder.embed("take rest"), embedder.embed("drink more water")
    assert wmd_variant(cand, ref, "word") == moverscore(cand, ref, n=1).cost
    assert wmd_variant(cand, ref, "bigram") == moverscore(cand, ref, n=2).cost
    assert wmd_variant(cand, ref, "sentence") > 0.0
    with pytest.raises(ParameterError):
        wmd_variant(cand, ref, "paragraph")


WORDS = ["fever", "cough", "rest", "water", "take", "drink", "persist", "and"]


def _random_texts(seed, count, embedder, min_len=1):
    rng = np.random.default_rng(seed)
    return [
        embedder.embed(" ".join(rng.choice(WORDS, size=int(rng.integers(min_len, 7))))) for _ in range(count)
    ]


def test_moverscore_is_symmetric():
    embedder = HashEmbedder(layers=3, width=8)
    texts = _random_texts(5, 40, embedder, min_len=2)
    for a, b in zip(texts[::2], texts[1::2]):
        for n in (1, 2):
            assert abs(moverscore(a, b, n=n).cost - moverscore(b, a, n=n).cost) <= 1e-12


def test_sentence_distance_obeys_the_triangle_inequality():
    embedder = HashEmbedder(layers=3, width=8)
    texts = _random_texts(6, 60, embedder)
    for a, b, c in zip(texts[::3], texts[1::3], texts[2::3]):
        direct = wmd_variant(a, c, "sentence")
        assert direct <= wmd_variant(a, b, "sentence") + wmd_variant(b, c, "sentence") + 1e-12
