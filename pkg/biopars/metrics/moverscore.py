"""
MoverScore and the word/bigram/sentence mover's distance variants.

Token vectors are the power mean of their layers; n-gram embeddings are
idf-weighted sums over the n-gram, and n-gram weights are their idf mass
normalized to sum to 1. The distance is the exact optimal transport cost
between the two n-gram clouds under Euclidean ground costs.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from biopars.errors import DomainError, EmbeddingError, ParameterError
from biopars.metrics.embeddings import EmbeddedText
from biopars.metrics.idf import IdfTable
from biopars.metrics.transport import TransportProblem, emd_exact


@dataclass(frozen=True)
class MoverScoreResult:
    """Transport cost (lower is better) and score = 1 / (1 + cost)."""

    cost: float
    score: float

    @classmethod
    def from_cost(cls, cost: float) -> "MoverScoreResult":
        return cls(cost, 1.0 / (1.0 + cost))


def power_mean(layers: np.ndarray, p: float = 1.0) -> np.ndarray:
    """
    Coordinatewise (1/L) * sum_l z_l ** p over the first axis; a single layer is returned as is.

    Raises:
        DomainError: p is not an integer and some coordinate is negative
    """
    layers = np.asarray(layers, dtype=np.float64)
    if layers.shape[0] < 1:
        raise ParameterError("power mean needs at least one layer")
    if layers.shape[0] == 1:
        return layers[0].copy()
    if float(p) != int(p) and np.any(layers < 0.0):
        raise DomainError(f"power {p} is not an integer and the layers have negative coordinates")
    return np.mean(layers**p, axis=0)


def _weights(text: EmbeddedText, idf: Optional[IdfTable]) -> np.ndarray:
    return idf.weights(text.tokens) if idf is not None else np.ones(len(text.tokens))


def ngram_embed(text: EmbeddedText, idf: Optional[IdfTable] = None, n: int = 1, p: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Embeddings and transport weights of the n-grams of a text.

    Returns:
        E of shape (grams, e) with E_i = sum_t idf(x_t) * phi(z_t) over the n-gram,
        and f of shape (grams,) with the normalized idf mass of each n-gram
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    count = len(text.tokens) - n + 1
    if count < 1:
        raise EmbeddingError(f"text with {len(text.tokens)} tokens has no {n}-gram")
    phi = np.stack([power_mean(text.layers[t], p) for t in range(len(text.tokens))])
    w = _weights(text, idf)
    weighted = w[:, None] * phi
    emb = np.stack([weighted[i : i + n].sum(axis=0) for i in range(count)])
    mass = np.array([w[i : i + n].sum() for i in range(count)])
    total = mass.sum()
    if total <= 0.0:
        raise EmbeddingError("n-gram weights have zero total mass")
    return emb, mass / total


def euclidean_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def moverscore(
    cand: EmbeddedText,
    ref: EmbeddedText,
    idf_cand: Optional[IdfTable] = None,
    idf_ref: Optional[IdfTable] = None,
    n: int = 1,
    p: float = 1.0,
) -> MoverScoreResult:
    """Exact transport cost between the n-gram embeddings of candidate and reference."""
    if cand.width != ref.width:
        raise EmbeddingError(f"embedding widths differ: {cand.width} vs {ref.width}")
    emb_x, fx = ngram_embed(cand, idf_cand, n, p)
    emb_y, fy = ngram_embed(ref, idf_ref, n, p)
    plan = emd_exact(TransportProblem.build(fx, fy, euclidean_costs(emb_x, emb_y)))
    return MoverScoreResult.from_cost(plan.cost)


def sentence_embedding(text: EmbeddedText, idf: Optional[IdfTable] = None, p: float = 1.0) -> np.ndarray:
    """idf-weighted mean of the token vectors of the whole text."""
    if not text.tokens:
        raise EmbeddingError("cannot embed an empty text")
    w = _weights(text, idf)
    if w.sum() <= 0.0:
        raise EmbeddingError("token weights have zero total mass")
    phi = np.stack([power_mean(text.layers[t], p) for t in range(len(text.tokens))])
    return (w[:, None] * phi).sum(axis=0) / w.sum()


def wmd_variant(
    cand: EmbeddedText,
    ref: EmbeddedText,
    variant: Literal["word", "bigram", "sentence"] = "word",
    idf_cand: Optional[IdfTable] = None,
    idf_ref: Optional[IdfTable] = None,
    p: float = 1.0,
) -> float:
    """
    Mover's distance at word (n=1) or bigram (n=2) level, or the sentence mover's
    distance ||E(x) - E(y)||_2 between whole-text embeddings.
    """
    if variant == "word":
        return moverscore(cand, ref, idf_cand, idf_ref, 1, p).cost
    if variant == "bigram":
        return moverscore(cand, ref, idf_cand, idf_ref, 2, p).cost
    if variant == "sentence":
        diff = sentence_embedding(cand, idf_cand, p) - sentence_embedding(ref, idf_ref, p)
        return float(np.sqrt(np.sum(diff * diff)))
    raise ParameterError(f"unknown variant {variant!r}")
