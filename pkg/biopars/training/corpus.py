"""Toy corpora and their split into training windows."""

from pathlib import Path

import numpy as np

from biopars.errors import InputError
from biopars.models.tensor import Rng


def load_corpus(path: str | Path) -> bytes:
    """Raw bytes of a UTF-8 text file; the vocabulary is byte-level."""
    data = Path(path).read_bytes()
    if not data:
        raise InputError(f"corpus {path} is empty")
    return data


def pattern_corpus(pattern: str, length: int) -> bytes:
    """The pattern repeated until the corpus holds `length` bytes."""
    unit = pattern.encode("utf-8")
    if not unit or length < 1:
        raise InputError("pattern and length must be non-empty")
    return (unit * (length // len(unit) + 1))[:length]


def make_windows(ids: np.ndarray, window: int) -> list[np.ndarray]:
    """
    Cut a token stream into windows of window + 1 tokens with stride `window`.

    Consecutive windows share one boundary token, so every next-token pair of
    the stream appears in exactly one window. A trailing partial window is dropped.

    Raises:
        InputError: The stream is shorter than one full window
    """
    if window < 1:
        raise InputError(f"window must be >= 1, got {window}")
    if len(ids) < window + 1:
        raise InputError(f"corpus of {len(ids)} tokens yields no window of {window + 1} tokens")
    return [ids[start : start + window + 1] for start in range(0, len(ids) - window, window)]


def sample_batch(windows: list[np.ndarray], batch_windows: int, rng: Rng) -> list[np.ndarray]:
    """All windows when they fit in one batch, otherwise a seeded subset in corpus order."""
    if len(windows) <= batch_windows:
        return windows
    picked = np.sort(rng.permutation(len(windows))[:batch_windows])
    return [windows[i] for i in picked]
