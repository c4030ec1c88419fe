"""Tests for corpus loading and windowing."""

import numpy as np
import pytest

from biopars.errors import InputError
from biopars.models.tensor import Rng
from biopars.training.corpus import load_corpus, make_windows, pattern_corpus, sample_batch


def test_pattern_corpus_repeats_to_length():
    assert pattern_corpus("abc", 7) == b"abcabca"
    with pytest.raises(InputError):
        pattern_corpus("", 5)


def test_load_corpus_rejects_empty_files(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_bytes(b"")
    with pytest.raises(InputError):
        load_corpus(path)
    path.write_text("héllo", encoding="utf-8")
    assert load_corpus(path) == "héllo".encode("utf-8")


def test_windows_share_one_boundary_token():
    ids = np.arange(10)
    windows = make_windows(ids, 3)
    assert [w.tolist() for w in windows] == [[0, 1, 2, 3], [3, 4, 5, 6], [6, 7, 8, 9]]
    pairs = {(int(a), int(b)) for w in windows for a, b in zip(w[:-1], w[1:])}
    assert pairs == {(i, i + 1) for i in range(9)}
    assert len(make_windows(np.arange(9), 3)) == 2
    with pytest.raises(InputError):
        make_windows(np.arange(3), 3)


def test_sample_batch_is_seeded_and_ordered():
    windows = [np.array([i]) for i in range(10)]
    assert sample_batch(windows, 20, Rng(0)) is windows
    a = [int(w[0]) for w in sample_batch(windows, 4, Rng(3))]
    b = [int(w[0]) for w in sample_batch(windows, 4, Rng(3))]
    assert a == b and a == sorted(a) and len(set(a)) == 4
