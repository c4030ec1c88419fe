"""
Token embeddings consumed by BERTScore and MoverScore.

No neural encoder runs here. Embeddings come from a JSON sidecar file or from
the deterministic hash embedder, which is seeded and unit-normalized but carries
no meaning: it only lets the embedding metrics run end to end.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from biopars.errors import EmbeddingError, InputError
from biopars.metrics.tokenize import as_tokens
from biopars.models.tensor import Rng
from biopars.utils import text_seed

logger = logging.getLogger(__name__)

SIDES = ("candidate", "reference")


@dataclass(frozen=True)
class EmbeddedText:
    """Tokens with one vector per token and layer; `layers` has shape (tokens, L, e)."""

    tokens: tuple[str, ...]
    layers: np.ndarray

    def __post_init__(self):
        if self.layers.ndim != 3 or self.layers.shape[0] != len(self.tokens):
            raise EmbeddingError(f"layers of shape {self.layers.shape} do not match {len(self.tokens)} tokens")
        if not np.all(np.isfinite(self.layers)):
            raise EmbeddingError("embeddings contain non-finite values")

    @property
    def num_layers(self) -> int:
        return self.layers.shape[1]

    @property
    def width(self) -> int:
        return self.layers.shape[2]

    def layer(self, index: int) -> np.ndarray:
        """Vectors of the 1-based layer `index`, shape (tokens, e)."""
        if not 1 <= index <= self.num_layers:
            raise EmbeddingError(f"layer {index} does not exist, text has {self.num_layers} layers")
        return self.layers[:, index - 1, :]

    @classmethod
    def from_json(cls, entry: Dict[str, Any]) -> "EmbeddedText":
        tokens = tuple(entry["tokens"])
        try:
            layers = np.array(entry["layers"], dtype=np.float64)
        except ValueError as e:
            raise EmbeddingError(f"embedding layers are not rectangular: {e}")
        return cls(tokens, layers)

    def to_json(self) -> Dict[str, Any]:
        return {"tokens": list(self.tokens), "layers": self.layers.tolist()}


class HashEmbedder:
    """
    Deterministic pseudo-embeddings: each token maps to L unit vectors drawn
    from a generator seeded by a hash of the token and the embedder seed.
    """

    def __init__(self, layers: int = 4, width: int = 16, seed: int = 17):
        if layers < 1 or width < 1:
            raise EmbeddingError("hash embedder needs at least one layer and one dimension")
        self.num_layers = layers
        self.width = width
        self.seed = seed

    def token_vectors(self, token: str) -> np.ndarray:
        vectors = Rng(text_seed(token, self.seed)).normal((self.num_layers, self.width))
        return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)

    def embed(self, text) -> EmbeddedText:
        tokens = as_tokens(text)
        layers = np.zeros((len(tokens), self.num_layers, self.width))
        for i, token in enumerate(tokens):
            layers[i] = self.token_vectors(token)
        return EmbeddedText(tokens, layers)


class EmbeddingStore:
    """
    JSON sidecar mapping item id -> {"candidate": {...}, "reference": {...}}.

    Each side holds ``tokens`` and ``layers`` (tokens x L x e).
    """

    def __init__(self, json_file_path: Optional[str] = None):
        self.json_file_path = json_file_path
        self.data: Dict[str, Dict[str, Any]] = {}
        if json_file_path is not None:
            self._load_data()

    def _load_data(self):
        if not os.path.exists(self.json_file_path):
            raise InputError(f"embedding sidecar {self.json_file_path} does not exist")
        with open(self.json_file_path, "r", encoding="utf-8") as f:
            try:
                self.data = json.load(f)
            except json.JSONDecodeError as e:
                raise InputError(f"embedding sidecar is not valid JSON: {e}", line=e.lineno)
        logger.info("Loaded embeddings for %d items from %s", len(self.data), self.json_file_path)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.data, f, indent=2, sort_keys=True)

    def __contains__(self, item_id: str) -> bool:
        entry = self.data.get(item_id)
        return entry is not None and all(side in entry for side in SIDES)

    def get(self, item_id: str, side: str) -> EmbeddedText:
        if item_id not in self:
            raise EmbeddingError(f"no embeddings for item {item_id!r}")
        return EmbeddedText.from_json(self.data[item_id][side])

    def put(self, item_id: str, candidate: EmbeddedText, reference: EmbeddedText) -> None:
        self.data[item_id] = {"candidate": candidate.to_json(), "reference": reference.to_json()}

    @classmethod
    def from_embedder(cls, items: Dict[str, tuple[str, str]], embedder: HashEmbedder) -> "EmbeddingStore":
        """Sidecar for {id: (candidate, reference)} in the same format as the files read from disk."""
        store = cls()
        for item_id, (candidate, reference) in items.items():
            store.put(item_id, embedder.embed(candidate), embedder.embed(reference))
        return store
