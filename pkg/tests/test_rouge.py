"""Tests for the ROUGE family, against hand-worked examples and brute-force oracles."""

import itertools
import math
from collections import Counter

import numpy as np
import pytest

from biopars.errors import InputError, ParameterError, UndefinedScoreError
from biopars.metrics.rouge import (
    f_measure,
    lcs_length,
    rouge_l,
    rouge_n,
    rouge_s,
    rouge_su,
    rouge_w,
    skip_bigrams,
    wlcs,
)
from biopars.metrics.tokenize import tokenize

REF = "police killed the gunman"


def _random_pairs(seed, count, max_len, alphabet="abcd"):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield tuple(rng.choice(list(alphabet), size=int(rng.integers(0, max_len + 1)))), tuple(
            rng.choice(list(alphabet), size=int(rng.integers(0, max_len + 1)))
        )


def _is_subsequence(sub, seq):
    it = iter(seq)
    return all(token in it for token in sub)


def _brute_lcs(x, y):
    for k in range(min(len(x), len(y)), 0, -1):
        if any(_is_subsequence(sub, y) for sub in itertools.combinations(x, k)):
            return k
    return 0


def _brute_wlcs(x, y, alpha):
    """Every index subset of the shorter string, each placed into the other string in every feasible way."""
    if len(x) > len(y):
        x, y = y, x
    best = 0.0
    for k in range(1, len(x) + 1):
        for idx in itertools.combinations(range(len(x)), k):
            # (last position in y, open run length) -> score of the closed runs
            states = {(-1, 0): 0.0}
            for t, i in enumerate(idx):
                placed = {}
                for (last, run), score in states.items():
                    for j in range(last + 1, len(y)):
                        if y[j] != x[i]:
                            continue
                        if run and idx[t - 1] == i - 1 and j == last + 1:
                            key, value = (j, run + 1), score
                        else:
                            key, value = (j, 1), score + (run**alpha if run else 0.0)
                        if value > placed.get(key, -1.0):
                            placed[key] = value
                states = placed
                if not states:
                    break
            for (_, run), score in states.items():
                best = max(best, score + run**alpha)
    return best


def test_tokenizer_case_folds_and_drops_punctuation():
    assert tokenize("Police KILLED, the gunman!").tokens == ("police", "killed", "the", "gunman")
    assert tokenize("...").tokens == ()
    assert tokenize("a+b=c, 42%").tokens == ("a", "b", "c", "42")


def test_tokenizer_keeps_persian_words_whole():
    # kasra is a combining mark, the joiner sits inside one word
    assert tokenize("کِتاب پزشکی").tokens == ("کِتاب", "پزشکی")
    assert tokenize("می\u200cخواهم؟").tokens == ("می\u200cخواهم",)
    assert tokenize("تب، سرفه").tokens == ("تب", "سرفه")
    assert rouge_l("کِتاب پزشکی", "کِتاب خوب").f == 0.5


def test_f_measure_edge_cases():
    assert f_measure(0.0, 0.0) == 0.0
    assert f_measure(0.5, 1.0) == pytest.approx(2 / 3)
    assert f_measure(0.2, 0.9, beta=math.inf) == 0.9


def test_rouge_n_by_hand():
    score = rouge_n("the cat sat", ["the cat sat on the mat"], n=1)
    assert (score.precision, score.recall) == (1.0, 0.5)
    assert score.f == pytest.approx(2 / 3)
    assert rouge_n("the cat sat", "the cat sat on the mat", n=2).recall == pytest.approx(2 / 5)
    # the is clipped to one match
    assert rouge_n("the the the", "the cat", n=1).precision == pytest.approx(1 / 3)


def test_rouge_n_multiple_references():
    score = rouge_n("a b", ["a", "b c"], n=1)
    assert score.recall == pytest.approx(2 / 3)
    assert score.precision == pytest.approx(0.5)


def test_rouge_n_errors():
    with pytest.raises(UndefinedScoreError):
        rouge_n("a b", ["a"], n=2)
    with pytest.raises(ParameterError):
        rouge_n("a", ["a"], n=0)
    assert rouge_n("", ["a b"], n=1).f == 0.0


def test_rouge_l_by_hand():
    same_order = rouge_l("police kill the gunman", REF)
    assert same_order.recall == same_order.precision == 0.75
    swapped = rouge_l("the gunman kill police", REF)
    assert swapped.f == 0.5
    assert rouge_l("", REF).f == 0.0
    with pytest.raises(InputError):
        rouge_l("a", "")


def test_lcs_matches_brute_force():
    for x, y in _random_pairs(0, 1000, 10):
        assert lcs_length(x, y) == _brute_lcs(x, y), (x, y)


def test_rouge_w_by_hand():
    ref = list("abcdefg")
    consecutive = rouge_w(list("abcdhik"), ref, alpha_w=2.0)
    spread = rouge_w(list("ahbkcid"), ref, alpha_w=2.0)
    assert consecutive.recall == pytest.approx(4 / 7)
    assert spread.recall == pytest.approx(2 / 7)
    # plain ROUGE-L cannot tell the two apart
    assert rouge_l(list("abcdhik"), ref).f == rouge_l(list("ahbkcid"), ref).f
    with pytest.raises(ParameterError):
        rouge_w("a", "a", alpha_w=0.5)


def test_wlcs_matches_brute_force():
    for x, y in _random_pairs(1, 1000, 10):
        assert wlcs(x, y, 1.2) == pytest.approx(_brute_wlcs(x, y, 1.2), abs=1e-12), (x, y)


def test_wlcs_with_unit_exponent_is_lcs():
    for x, y in _random_pairs(2, 1000, 10):
        assert wlcs(x, y, 1.0) == lcs_length(x, y)
        if y:
            assert rouge_w(x, y, alpha_w=1.0) == rouge_l(x, y)


def test_rouge_s_by_hand():
    assert rouge_s("police kill the gunman", REF).f == 0.5
    assert rouge_s("the gunman police killed", REF).f == pytest.approx(1 / 3)
    with pytest.raises(UndefinedScoreError):
        rouge_s("police", REF)


def test_skip_bigrams_match_brute_force():
    for x, y in _random_pairs(3, 1000, 10):
        cx, cy = Counter(itertools.combinations(x, 2)), Counter(itertools.combinations(y, 2))
        assert skip_bigrams(x) == cx
        assert sum((skip_bigrams(x) & skip_bigrams(y)).values()) == sum((cx & cy).values())


def test_skip_bigram_gap_limit():
    assert set(skip_bigrams(("a", "b", "c", "d"), max_gap=0)) == {("a", "b"), ("b", "c"), ("c", "d")}
    assert sum(skip_bigrams(("a", "b", "c", "d"), max_gap=1).values()) == 5


def test_rouge_su_variants():
    assert rouge_su("a b", "a b") == 2.0
    assert rouge_su("a b", "a b", classical=True) == 1.0
    # one shared unigram, no shared skip-bigram
    assert rouge_su("a c", "a b", classical=True) == pytest.approx(1 / 3)
    with pytest.raises(UndefinedScoreError):
        rouge_su("a", "a b")
