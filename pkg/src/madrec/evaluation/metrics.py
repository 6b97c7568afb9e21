"""Ranking metrics for a single held-out item, and n-gram text overlap scores."""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


def rank_of(ranked: Sequence[str], gt: str) -> int | None:
    """1-based position of ``gt`` or None."""
    for pos, item in enumerate(ranked, 1):
        if item == gt:
            return pos
    return None


def hit_at(ranked: Sequence[str], gt: str, n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    r = rank_of(ranked, gt)
    return int(r is not None and r <= n)


def ndcg_at(ranked: Sequence[str], gt: str, n: int) -> float:
    # one relevant item, so the ideal DCG is 1
    if n < 1:
        raise ValueError("n must be >= 1")
    r = rank_of(ranked, gt)
    if r is None or r > n:
        return 0.0
    return 1.0 / math.log2(r + 1)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped(cand: Sequence[str], ref: Sequence[str], n: int) -> tuple[int, int, int]:
    c, r = ngrams(cand, n), ngrams(ref, n)
    overlap = sum(min(cnt, r[g]) for g, cnt in c.items())
    return overlap, sum(c.values()), sum(r.values())


def bleu2(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Sentence BLEU with unigram and bigram precision.

    Bigram counts get add-one smoothing; the brevity penalty is the usual
    exp(1 - r/c) for candidates shorter than the reference.
    """
    if not candidate:
        return 0.0
    m1, c1, _ = _clipped(candidate, reference, 1)
    if m1 == 0:
        return 0.0
    m2, c2, _ = _clipped(candidate, reference, 2)
    p1 = m1 / c1
    p2 = (m2 + 1) / (c2 + 1)
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.sqrt(p1 * p2)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> float:
    """ROUGE-N F1; 0 when either side has no n-grams."""
    if n not in (1, 2):
        raise ValueError("rouge_n supports n in {1, 2}")
    overlap, c, r = _clipped(candidate, reference, n)
    if c == 0 or r == 0:
        return 0.0
    return _f1(overlap / c, overlap / r)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    return _f1(lcs / len(candidate), lcs / len(reference))
