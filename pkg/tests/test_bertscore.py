"""Tests for BERTScore greedy matching."""

import numpy as np
import pytest

from biopars.errors import EmbeddingError
from biopars.metrics.bertscore import bertscore, default_layer
from biopars.metrics.embeddings import EmbeddedText, HashEmbedder
from biopars.metrics.idf import build_idf


def _text(tokens, vectors):
    return EmbeddedText(tuple(tokens), np.asarray(vectors, dtype=np.float64)[:, None, :])


def test_default_layer():
    assert default_layer(1) == 1
    assert default_layer(4) == 3
    assert default_layer(12) == 9


def test_identical_texts_score_one():
    text = HashEmbedder(layers=4, width=16).embed("fever and cough persist")
    score = bertscore(text, text)
    assert score.precision == pytest.approx(1.0)
    assert score.recall == pytest.approx(1.0)
    assert score.f == pytest.approx(1.0)


def test_greedy_matching_by_hand():
    cand = _text(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    ref = _text(["c"], [[1.0, 0.0]])
    score = bertscore(cand, ref)
    assert score.recall == pytest.approx(1.0)
    assert score.precision == pytest.approx(0.5)
    assert score.f == pytest.approx(2 / 3)


def test_idf_weighting_and_baseline():
    cand = _text(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    ref = _text(["c"], [[1.0, 0.0]])
    idf = build_idf(["a", "b x", "b y"])
    # a carries idf log 3, b carries log 1.5
    weighted = bertscore(cand, ref, idf=idf)
    assert weighted.precision == pytest.approx(np.log(3) / (np.log(3) + np.log(1.5)))
    rescaled = bertscore(cand, ref, baseline=0.5)
    assert rescaled.recall == pytest.approx(1.0)
    assert rescaled.precision == pytest.approx(0.0)
    with pytest.raises(EmbeddingError):
        bertscore(cand, ref, baseline=1.0)


def test_errors():
    a = _text(["a"], [[1.0, 0.0]])
    with pytest.raises(EmbeddingError):
        bertscore(a, _text(["b"], [[1.0, 0.0, 0.0]]))
    with pytest.raises(EmbeddingError):
        bertscore(a, EmbeddedText((), np.zeros((0, 1, 2))))
    with pytest.raises(EmbeddingError):
        bertscore(a, a, layer=2)


def test_scores_ignore_token_order(rng):
    embedder = HashEmbedder(layers=2, width=8)
    idf = build_idf(["fever and cough", "take rest", "drink water and rest"])
    words = ["fever", "and", "cough", "take", "rest", "drink", "water"]
    for _ in range(30):
        cand = embedder.embed(" ".join(rng.choice(words, size=int(rng.integers(1, 7)))))
        ref = embedder.embed(" ".join(rng.choice(words, size=int(rng.integers(1, 7)))))
        order = rng.permutation(len(cand.tokens))
        shuffled = EmbeddedText(tuple(cand.tokens[i] for i in order), cand.layers[order])
        for weights in (None, idf):
            a, b = bertscore(cand, ref, idf=weights), bertscore(shuffled, ref, idf=weights)
            assert a.precision == pytest.approx(b.precision, abs=1e-12)
            assert a.recall == pytest.approx(b.recall, abs=1e-12)
            assert a.f == pytest.approx(b.f, abs=1e-12)


def test_layer_zero_is_rejected():
    text = HashEmbedder(layers=2, width=4).embed("take rest")
    with pytest.raises(EmbeddingError):
        bertscore(text, text, layer=0)
