"""Context ranking for the Sim and MMR evaluation settings."""

from typing import Optional

import numpy as np

from biopars.errors import DimensionError, EmbeddingError, ParameterError


def _cosines(query: np.ndarray, contexts: np.ndarray) -> np.ndarray:
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    query = np.asarray(query, dtype=np.float64)
    if contexts.size and contexts.shape[1] != query.shape[0]:
        raise DimensionError(f"query width {query.shape[0]} differs from context width {contexts.shape[1]}")
    q_norm = np.linalg.norm(query)
    if q_norm == 0.0:
        raise EmbeddingError("query vector is zero")
    c_norm = np.linalg.norm(contexts, axis=1)
    return (contexts @ query) / (q_norm * np.where(c_norm > 0.0, c_norm, 1.0))


def _pairwise_cosines(contexts: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(contexts, axis=1, keepdims=True)
    unit = contexts / np.where(norms > 0.0, norms, 1.0)
    return unit @ unit.T


def rank_sim(query, contexts) -> list[int]:
    """Context indices by descending cosine similarity to the query; ties keep input order."""
    sims = _cosines(query, contexts)
    return sorted(range(len(sims)), key=lambda i: (-sims[i], i))


def rank_mmr(query, contexts, lam: float = 0.5, k: Optional[int] = None) -> list[int]:
    """
    Maximal marginal relevance selection.

    Each pick maximizes lam * sim(q, d) - (1 - lam) * max over already picked s of sim(d, s);
    ties go to the lowest index.
    """
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    relevance = _cosines(query, contexts)
    count = len(relevance)
    k = count if k is None else k
    if not 0 <= k <= count:
        raise ParameterError(f"k must lie in [0, {count}], got {k}")
    if k == 0:
        return []
    redundancy = _pairwise_cosines(np.atleast_2d(np.asarray(contexts, dtype=np.float64)))

    picked: list[int] = []
    remaining = list(range(count))
    while len(picked) < k:
        best, best_score = None, -np.inf
        for i in remaining:
            penalty = max(redundancy[i, j] for j in picked) if picked else 0.0
            score = lam * relevance[i] - (1.0 - lam) * penalty
            if score > best_score:
                best, best_score = i, score
        picked.append(best)
        remaining.remove(best)
    return picked
