"""Pseudo-relevance feedback: relevance model, query expansion, scoring.

The relevance model is a lightweight RM3 surrogate built purely from index
statistics: feedback-score-weighted normalized term frequencies, with a
softmax over the feedback scores. Expanded queries are scored as weighted
sums of per-term BM25 contributions so all features share the BM25 scale.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .analysis import AnalyzerConfig, tokenize
from .errors import BudgetRankError
from .index import DEFAULT_B, DEFAULT_K1, Index, RankedEntry, RankedList, bm25_term, idf


@dataclass(frozen=True)
class WeightedQuery:
    """Term distribution; weights are strictly positive and sum to 1."""

    terms: dict[str, float]
    provenance: str = "original"  # "original" | "expanded"


@dataclass(frozen=True)
class FeedbackSet:
    """Ordered (doc id, feedback score) pairs; doc ids unique."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        ids = [d for d, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("feedback set contains duplicate doc ids")


def weighted_query_from_text(
    text: str, config: AnalyzerConfig = AnalyzerConfig()
) -> WeightedQuery:
    """Normalized term-count distribution of an analyzed query string."""
    counts = Counter(tokenize(text, config))
    total = sum(counts.values())
    if total == 0:
        return WeightedQuery({}, "original")
    return WeightedQuery({t: c / total for t, c in counts.items()}, "original")


def _softmax(values: list[float]) -> list[float]:
    peak = max(values)
    exps = [math.exp(v - peak) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def relevance_model(
    index: Index, feedback: FeedbackSet, fb_terms: int
) -> WeightedQuery:
    """Build a relevance model from feedback documents.

    Candidate weight(t) = sum over feedback docs of (tf(t,d)/dl(d)) times the
    softmax-normalized feedback score of d. The top ``fb_terms`` candidates
    (ties broken lexicographically) are kept and renormalized to sum 1.
    Index terms are post-analysis, so stopwords were already removed.
    """
    if not feedback.entries:
        raise BudgetRankError("relevance model requires a non-empty feedback set")
    if fb_terms < 1:
        raise ValueError("fb_terms must be >= 1")
    doc_weights = _softmax([score for _, score in feedback.entries])
    candidates: dict[str, float] = {}
    for (doc_id, _), dw in zip(feedback.entries, doc_weights):
        dl = index.doc_lengths.get(doc_id, 0)
        if dl == 0:
            continue
        for term, tf in index.doc_term_frequencies(doc_id).items():
            candidates[term] = candidates.get(term, 0.0) + dw * tf / dl
    if not candidates:
        raise BudgetRankError("feedback documents contain no usable terms")
    top = sorted(candidates.items(), key=lambda p: (-p[1], p[0]))[:fb_terms]
    total = sum(w for _, w in top)
    return WeightedQuery({t: w / total for t, w in top}, "expanded")


def rm3_expand(
    original: WeightedQuery, model: WeightedQuery, original_query_weight: float
) -> WeightedQuery:
    """Interpolate the original query with the relevance model."""
    alpha = original_query_weight
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("original_query_weight must be in [0, 1]")
    merged: dict[str, float] = {}
    for t, w in original.terms.items():
        merged[t] = merged.get(t, 0.0) + alpha * w
    for t, w in model.terms.items():
        merged[t] = merged.get(t, 0.0) + (1.0 - alpha) * w
    return WeightedQuery({t: w for t, w in merged.items() if w > 0.0}, "expanded")


def rm3_feature(
    index: Index,
    q_prime: WeightedQuery,
    doc_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """Weighted sum of per-term BM25 contributions under the expanded query."""
    return sum(
        w * bm25_term(index, t, doc_id, k1, b) for t, w in q_prime.terms.items()
    )


def search_weighted(
    index: Index,
    q_prime: WeightedQuery,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    query_id: str = "",
) -> RankedList:
    """Top-k retrieval for a weighted query; same tie rule as plain search."""
    if k < 0:
        raise ValueError("k must be >= 0")
    scores: dict[str, float] = {}
    for term, weight in q_prime.terms.items():
        plist = index.postings.get(term)
        if not plist:
            continue
        t_idf = idf(index, term)
        for doc_id, tf in plist:
            dl = index.doc_lengths[doc_id]
            norm = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
            scores[doc_id] = (
                scores.get(doc_id, 0.0) + weight * t_idf * tf * (k1 + 1.0) / norm
            )
    candidates = sorted(scores.items(), key=lambda p: (-p[1], p[0]))[:k]
    return RankedList(
        query_id,
        [RankedEntry(d, s, i + 1) for i, (d, s) in enumerate(candidates)],
    )
