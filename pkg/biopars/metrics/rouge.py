"""
ROUGE family: N-gram overlap, longest common subsequence (L), weighted LCS (W),
skip-bigrams (S) and skip-bigrams plus unigrams (SU).

Every function accepts raw strings, TokenizedText or token sequences.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from biopars.errors import InputError, ParameterError, UndefinedScoreError
from biopars.metrics.tokenize import as_tokens


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f: float


def f_measure(precision: float, recall: float, beta: float = 1.0) -> float:
    """(1 + b^2) R P / (R + b^2 P); 0 when the denominator vanishes, recall when beta is infinite."""
    if math.isinf(beta):
        return recall
    b2 = beta * beta
    denom = recall + b2 * precision
    if denom == 0.0:
        return 0.0
    return (1.0 + b2) * recall * precision / denom


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# ROUGE-N


def rouge_n(cand, refs, n: int = 1, beta: float = 1.0) -> RougeScore:
    """
    Clipped n-gram overlap against one or more references.

    Recall sums matches and reference n-grams over all references; precision
    divides the same matches by the candidate n-gram count once per reference.

    Args:
        cand: Candidate text
        refs: A list of references, or a single reference (string, TokenizedText or token tuple)
        n: N-gram order
        beta: F-measure weight

    Raises:
        UndefinedScoreError: Every reference is shorter than n
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not isinstance(refs, list):
        refs = [refs]
    cand_grams = ngrams(as_tokens(cand), n)
    cand_total = sum(cand_grams.values())
    matched = ref_total = 0
    for ref in refs:
        ref_grams = ngrams(as_tokens(ref), n)
        matched += sum(min(count, cand_grams[g]) for g, count in ref_grams.items())
        ref_total += sum(ref_grams.values())
    if ref_total == 0:
        raise UndefinedScoreError(f"no reference has {n} or more tokens")
    recall = matched / ref_total
    precision = matched / (cand_total * len(refs)) if cand_total else 0.0
    return RougeScore(precision, recall, f_measure(precision, recall, beta))


# ---------------------------------------------------------------------------
# ROUGE-L and ROUGE-W


def lcs_length(x: Sequence[str], y: Sequence[str]) -> int:
    prev = [0] * (len(y) + 1)
    for xi in x:
        cur = [0] * (len(y) + 1)
        for j, yj in enumerate(y, start=1):
            cur[j] = prev[j - 1] + 1 if xi == yj else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _check_pair(cand, ref) -> tuple[tuple[str, ...], tuple[str, ...]]:
    x, y = as_tokens(cand), as_tokens(ref)
    if not y:
        raise InputError("reference is empty")
    return x, y


def rouge_l(cand, ref, beta: float = 1.0) -> RougeScore:
    """
    LCS-based recall LCS/m and precision LCS/n (m reference, n candidate tokens).

    An empty candidate scores 0.
    """
    x, y = _check_pair(cand, ref)
    if not x:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(x, y)
    recall, precision = lcs / len(y), lcs / len(x)
    return RougeScore(precision, recall, f_measure(precision, recall, beta))


def wlcs(x: Sequence[str], y: Sequence[str], alpha: float) -> float:
    """
    Maximum over common subsequences of sum(run_length ** alpha) over their consecutive runs.

    best[i][j] extends either prefix or closes a run of k matches ending at (i, j).
    """
    m, n = len(x), len(y)
    best = [[0.0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            value = max(best[i - 1][j], best[i][j - 1])
            k = 0
            while k < min(i, j) and x[i - 1 - k] == y[j - 1 - k]:
                k += 1
                value = max(value, best[i - k][j - k] + k**alpha)
            best[i][j] = value
    return best[m][n]


def rouge_w(cand, ref, alpha_w: float = 1.2, beta: float = 1.0) -> RougeScore:
    """Weighted LCS with run weight f(k) = k ** alpha_w; recall f^-1(WLCS / f(m)), precision f^-1(WLCS / f(n))."""
    if alpha_w < 1.0:
        raise ParameterError(f"alpha_w must be >= 1, got {alpha_w}")
    x, y = _check_pair(cand, ref)
    if not x:
        return RougeScore(0.0, 0.0, 0.0)
    weight = wlcs(x, y, alpha_w)
    recall = (weight / len(y) ** alpha_w) ** (1.0 / alpha_w)
    precision = (weight / len(x) ** alpha_w) ** (1.0 / alpha_w)
    return RougeScore(precision, recall, f_measure(precision, recall, beta))


# ---------------------------------------------------------------------------
# ROUGE-S and ROUGE-SU


def skip_bigrams(tokens: Sequence[str], max_gap: Optional[int] = None) -> Counter:
    """Ordered token pairs (i < j) with at most max_gap tokens between them."""
    pairs = Counter()
    for i in range(len(tokens)):
        stop = len(tokens) if max_gap is None else min(len(tokens), i + max_gap + 2)
        for j in range(i + 1, stop):
            pairs[(tokens[i], tokens[j])] += 1
    return pairs


def _overlap(a: Counter, b: Counter) -> int:
    return sum(min(count, b[key]) for key, count in a.items())


def rouge_s(cand, ref, beta: float = 1.0, max_gap: Optional[int] = None) -> RougeScore:
    """
    Skip-bigram co-occurrence: SKIP2 / C(m, 2) and SKIP2 / C(n, 2).

    With max_gap the denominators count only the eligible pairs of each side.

    Raises:
        UndefinedScoreError: Either side has fewer than 2 tokens
    """
    x, y = as_tokens(cand), as_tokens(ref)
    if len(x) < 2 or len(y) < 2:
        raise UndefinedScoreError("ROUGE-S needs at least 2 tokens on both sides")
    cand_pairs, ref_pairs = skip_bigrams(x, max_gap), skip_bigrams(y, max_gap)
    skip2 = _overlap(cand_pairs, ref_pairs)
    recall = skip2 / sum(ref_pairs.values())
    precision = skip2 / sum(cand_pairs.values())
    return RougeScore(precision, recall, f_measure(precision, recall, beta))


def rouge_su(cand, ref, beta: float = 1.0, classical: bool = False, max_gap: Optional[int] = None) -> float:
    """
    ROUGE-S F plus unigram F1, so the score lies in [0, 2].

    With classical=True, skip-bigrams and unigrams are pooled into one count
    instead and the result is a single F in [0, 1].
    """
    if not classical:
        return rouge_s(cand, ref, beta, max_gap).f + rouge_n(cand, [ref], 1).f
    x, y = as_tokens(cand), as_tokens(ref)
    if not x or not y:
        raise UndefinedScoreError("ROUGE-SU needs tokens on both sides")
    cand_units = skip_bigrams(x, max_gap) + Counter((t,) for t in x)
    ref_units = skip_bigrams(y, max_gap) + Counter((t,) for t in y)
    hits = _overlap(cand_units, ref_units)
    recall = hits / sum(ref_units.values())
    precision = hits / sum(cand_units.values())
    return f_measure(precision, recall, beta)
