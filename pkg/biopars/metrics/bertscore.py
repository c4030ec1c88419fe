"""BERTScore: greedy cosine matching of token embeddings, optionally idf-weighted and baseline-rescaled."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from biopars.errors import EmbeddingError
from biopars.metrics.embeddings import EmbeddedText
from biopars.metrics.idf import IdfTable


@dataclass(frozen=True)
class BertScore:
    precision: float
    recall: float
    f: float


def default_layer(num_layers: int) -> int:
    """The only layer when there is one, else layer ceil(0.75 * L) (1-based)."""
    return 1 if num_layers == 1 else math.ceil(0.75 * num_layers)


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return vectors / np.where(norms > 0.0, norms, 1.0)


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    total = float(np.sum(weights))
    if total == 0.0:
        raise EmbeddingError("idf weights sum to zero")
    return float(np.dot(weights, values) / total)


def bertscore(
    cand: EmbeddedText,
    ref: EmbeddedText,
    layer: Optional[int] = None,
    idf: Optional[IdfTable] = None,
    baseline: Optional[float] = None,
) -> BertScore:
    """
    Greedy-match precision, recall and F over one embedding layer.

    Recall averages, over reference tokens, the best cosine similarity with any
    candidate token; precision does the same over candidate tokens.

    Args:
        cand: Candidate embeddings
        ref: Reference embeddings
        layer: 1-based layer; defaults to default_layer(L)
        idf: Token weights; uniform when omitted
        baseline: Rescale every score as (s - b) / (1 - b)

    Returns:
        The three scores
    """
    if not cand.tokens or not ref.tokens:
        raise EmbeddingError("BERTScore needs tokens on both sides")
    if cand.width != ref.width:
        raise EmbeddingError(f"embedding widths differ: {cand.width} vs {ref.width}")
    if layer is None:
        layer = default_layer(min(cand.num_layers, ref.num_layers))
    x = _unit_rows(cand.layer(layer))
    y = _unit_rows(ref.layer(layer))
    sim = x @ y.T

    w_cand = idf.weights(cand.tokens) if idf is not None else np.ones(len(cand.tokens))
    w_ref = idf.weights(ref.tokens) if idf is not None else np.ones(len(ref.tokens))
    precision = _weighted_mean(sim.max(axis=1), w_cand)
    recall = _weighted_mean(sim.max(axis=0), w_ref)
    f = 2.0 * precision * recall / (precision + recall) if precision + recall != 0.0 else 0.0

    if baseline is not None:
        if baseline >= 1.0:
            raise EmbeddingError(f"baseline must be below 1, got {baseline}")
        precision, recall, f = ((s - baseline) / (1.0 - baseline) for s in (precision, recall, f))
    return BertScore(precision, recall, f)
