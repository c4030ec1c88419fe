"""Inverse document frequency over a reference corpus."""

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from biopars.errors import InputError
from biopars.metrics.tokenize import as_tokens

UNSEEN_SMOOTHING = 0.5


@dataclass(frozen=True)
class IdfTable:
    """
    idf(w) = -log(df(w) / M) for words of the corpus.

    Words never seen get -log((0 + 0.5) / (M + 1)), a finite positive weight.
    """

    documents: int
    values: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, word: str) -> float:
        value = self.values.get(word)
        if value is None:
            return math.log((self.documents + 1) / UNSEEN_SMOOTHING)
        return value

    def weights(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self[t] for t in tokens], dtype=np.float64)


def build_idf(corpus: Iterable) -> IdfTable:
    """
    Document frequencies of every word of the corpus.

    Args:
        corpus: Documents, each a string, TokenizedText or token sequence

    Returns:
        The idf table; a word present in every document has idf 0
    """
    docs = [set(as_tokens(doc)) for doc in corpus]
    if not docs:
        raise InputError("idf needs at least one document")
    counts: dict[str, int] = {}
    for doc in docs:
        for word in doc:
            counts[word] = counts.get(word, 0) + 1
    m = len(docs)
    return IdfTable(m, {word: math.log(m / count) for word, count in sorted(counts.items())})


def uniform_idf(tokens: Sequence[str]) -> np.ndarray:
    return np.ones(len(tokens))
