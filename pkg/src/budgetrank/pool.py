"""Candidate pool construction and per-document feature assembly.

The pool is the deduplicated union of the original query's retrieval and
each reformulation's retrieval. Every pool member gets a dense feature row
of length m+2: one BM25 score per reformulation, the original query's BM25
score, and the expanded-query score. Features are computed for every pool
member against every query, including documents that query did not retrieve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import AnalyzerConfig, tokenize
from .index import DEFAULT_B, DEFAULT_K1, Index, RankedList, bm25_score, search
from .prf import WeightedQuery, rm3_feature
from .reformulate import ReformulationSet

_STD_EPS = 1e-12


@dataclass
class CandidatePool:
    query_id: str
    members: list[str]                      # sorted doc ids
    provenance: dict[str, set[int]]         # doc id -> source indices (0 = original)
    k_cap: int
    source_lists: dict[int, RankedList] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.members)


def build_pool(
    index: Index,
    original: str,
    reforms: ReformulationSet,
    k: int,
    config: AnalyzerConfig | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> CandidatePool:
    if k < 1:
        raise ValueError("k must be >= 1")
    provenance: dict[str, set[int]] = {}
    source_lists: dict[int, RankedList] = {}
    queries = [(0, original)] + [
        (i + 1, q) for i, q in enumerate(reforms.reformulations)
    ]
    for source, query in queries:
        ranked = search(index, query, k, config, k1, b, query_id=reforms.query_id)
        source_lists[source] = ranked
        for entry in ranked.entries:
            provenance.setdefault(entry.doc_id, set()).add(source)
    return CandidatePool(
        query_id=reforms.query_id,
        members=sorted(provenance),
        provenance=provenance,
        k_cap=k,
        source_lists=source_lists,
    )


@dataclass
class FeatureMatrix:
    doc_ids: list[str]
    raw: np.ndarray                     # (n_docs, m+2), pre-standardization
    values: np.ndarray                  # standardized view (== raw copy if not)
    col_mean: np.ndarray | None = None  # set once standardize() ran
    col_std: np.ndarray | None = None   # population stddev; 0 marks constants
    rm3_missing: bool = False

    _row_of: dict[str, int] | None = field(default=None, repr=False, compare=False)

    @property
    def standardized(self) -> bool:
        return self.col_mean is not None

    def row_index(self, doc_id: str) -> int:
        if self._row_of is None:
            self._row_of = {d: i for i, d in enumerate(self.doc_ids)}
        return self._row_of[doc_id]


def feature_labels(m: int) -> list[str]:
    return [f"Q_{i + 1}" for i in range(m)] + ["Q", "RM3"]


def feature_matrix(
    index: Index,
    pool: CandidatePool,
    original: str,
    reforms: ReformulationSet,
    q_prime: WeightedQuery | None,
    config: AnalyzerConfig | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> FeatureMatrix:
    cfg = config if config is not None else index.analyzer
    query_terms = [tokenize(q, cfg) for q in reforms.reformulations]
    query_terms.append(tokenize(original, cfg))
    n, m = len(pool.members), reforms.m
    raw = np.zeros((n, m + 2))
    for row, doc_id in enumerate(pool.members):
        for col, terms in enumerate(query_terms):
            raw[row, col] = bm25_score(index, terms, doc_id, k1, b)
        if q_prime is not None:
            raw[row, m + 1] = rm3_feature(index, q_prime, doc_id, k1, b)
    return FeatureMatrix(
        doc_ids=list(pool.members),
        raw=raw,
        values=raw.copy(),
        rm3_missing=q_prime is None,
    )


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Per-column z-score over pool rows, in place on ``values``.

    Constant columns (population stddev below 1e-12) become all zeros and
    record stddev 0 so later column refreshes stay consistent.
    """
    if matrix.raw.shape[0] < 1:
        raise ValueError("standardize requires at least one row")
    mean = matrix.raw.mean(axis=0)
    std = matrix.raw.std(axis=0)  # population stddev
    std = np.where(std < _STD_EPS, 0.0, std)
    safe = np.where(std == 0.0, 1.0, std)
    matrix.values = (matrix.raw - mean) / safe
    matrix.values[:, std == 0.0] = 0.0
    matrix.col_mean = mean
    matrix.col_std = std
    return matrix


def refresh_rm3_column(
    matrix: FeatureMatrix,
    index: Index,
    q_prime: WeightedQuery,
    doc_ids: list[str],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> None:
    """Recompute the expansion feature for ``doc_ids`` and re-standardize it
    with the stored column statistics (when standardization is active)."""
    col = matrix.raw.shape[1] - 1
    rows = [matrix.row_index(d) for d in doc_ids]
    for r, doc_id in zip(rows, doc_ids):
        matrix.raw[r, col] = rm3_feature(index, q_prime, doc_id, k1, b)
    if matrix.standardized:
        assert matrix.col_mean is not None and matrix.col_std is not None
        std = matrix.col_std[col]
        if std == 0.0:
            matrix.values[rows, col] = 0.0
        else:
            matrix.values[rows, col] = (
                matrix.raw[rows, col] - matrix.col_mean[col]
            ) / std
    else:
        matrix.values[rows, col] = matrix.raw[rows, col]
    matrix.rm3_missing = False
