"""Inverted index construction, BM25 scoring, and top-k search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .analysis import AnalyzerConfig, tokenize
from .errors import DuplicateDocumentError, FormatError, UnknownDocumentError

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_INDEX_FORMAT = "budgetrank-index"
_INDEX_VERSION = 1


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass
class RankedList:
    query_id: str
    entries: list[RankedEntry]

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def ranked_list(query_id: str, scored: Iterable[tuple[str, float]]) -> RankedList:
    """Build a RankedList from (doc_id, score) pairs, applying the global
    tie rule (score descending, doc id ascending) and 1-based ranks."""
    ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
    return RankedList(
        query_id,
        [RankedEntry(d, s, i + 1) for i, (d, s) in enumerate(ordered)],
    )


@dataclass
class Index:
    """Immutable after build; concurrent read-only scoring is safe."""

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float
    doc_freq: dict[str, int]
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    _doc_terms: dict[str, dict[str, int]] | None = field(
        default=None, repr=False, compare=False
    )

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    def term_frequency(self, term: str, doc_id: str) -> int:
        if not self.has_doc(doc_id):
            raise UnknownDocumentError(f"unknown document id: {doc_id!r}")
        return self.doc_term_frequencies(doc_id).get(term, 0)

    def doc_term_frequencies(self, doc_id: str) -> dict[str, int]:
        """Per-document term vector, built lazily by inverting the postings."""
        if not self.has_doc(doc_id):
            raise UnknownDocumentError(f"unknown document id: {doc_id!r}")
        if self._doc_terms is None:
            inverted: dict[str, dict[str, int]] = {d: {} for d in self.doc_lengths}
            for term, plist in self.postings.items():
                for d, tf in plist:
                    inverted[d][term] = tf
            self._doc_terms = inverted
        return self._doc_terms[doc_id]


def build_index(
    docs: Iterable[Document], config: AnalyzerConfig = AnalyzerConfig()
) -> Index:
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in docs:
        if doc.id in doc_lengths:
            raise DuplicateDocumentError(f"duplicate document id: {doc.id!r}")
        terms = tokenize(doc.text, config)
        doc_lengths[doc.id] = len(terms)
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.id, tf))
    for plist in postings.values():
        plist.sort(key=lambda p: p[0])
    n = len(doc_lengths)
    avgdl = sum(doc_lengths.values()) / n if n else 0.0
    doc_freq = {term: len(plist) for term, plist in postings.items()}
    return Index(postings, doc_lengths, n, avgdl, doc_freq, config)


def idf(index: Index, term: str) -> float:
    """Lucene-style strictly positive IDF."""
    df = index.doc_freq.get(term, 0)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_term(
    index: Index,
    term: str,
    doc_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    tf = index.term_frequency(term, doc_id)
    if tf == 0:
        return 0.0
    dl = index.doc_lengths[doc_id]
    norm = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
    return idf(index, term) * tf * (k1 + 1.0) / norm


def bm25_score(
    index: Index,
    query_terms: list[str],
    doc_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    return sum(bm25_term(index, t, doc_id, k1, b) for t in query_terms)


def search(
    index: Index,
    query: str,
    k: int,
    config: AnalyzerConfig | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    query_id: str = "",
) -> RankedList:
    """Top-k documents by BM25; zero-score documents are omitted, so the
    result may be shorter than k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    terms = tokenize(query, config if config is not None else index.analyzer)
    scores: dict[str, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        t_idf = idf(index, term)
        for doc_id, tf in plist:
            dl = index.doc_lengths[doc_id]
            norm = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + t_idf * tf * (k1 + 1.0) / norm
    candidates = sorted(scores.items(), key=lambda p: (-p[1], p[0]))[:k]
    return RankedList(
        query_id,
        [RankedEntry(d, s, i + 1) for i, (d, s) in enumerate(candidates)],
    )


# ---------------------------------------------------------------------------
# Persistence: one self-describing JSON document with a version header.
# ---------------------------------------------------------------------------


def save_index(index: Index, path: str) -> None:
    payload = {
        "format": _INDEX_FORMAT,
        "version": _INDEX_VERSION,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in p] for t, p in index.postings.items()},
        "analyzer": {
            "lowercase": index.analyzer.lowercase,
            "stopwords": sorted(index.analyzer.stopwords),
            "stemming": index.analyzer.stemming,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_index(path: str) -> Index:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not a valid index file: {path}") from exc
    if not isinstance(payload, dict) or payload.get("format") != _INDEX_FORMAT:
        raise FormatError(f"not a {_INDEX_FORMAT} file: {path}")
    if payload.get("version") != _INDEX_VERSION:
        raise FormatError(
            f"unsupported index version {payload.get('version')!r} in {path}"
        )
    analyzer = AnalyzerConfig(
        lowercase=payload["analyzer"]["lowercase"],
        stopwords=frozenset(payload["analyzer"]["stopwords"]),
        stemming=payload["analyzer"]["stemming"],
    )
    postings = {
        t: [(d, int(tf)) for d, tf in p] for t, p in payload["postings"].items()
    }
    return Index(
        postings=postings,
        doc_lengths={d: int(v) for d, v in payload["doc_lengths"].items()},
        doc_count=int(payload["doc_count"]),
        avg_doc_length=float(payload["avg_doc_length"]),
        doc_freq={t: len(p) for t, p in postings.items()},
        analyzer=analyzer,
    )


# ---------------------------------------------------------------------------
# Corpus ingestion.
# ---------------------------------------------------------------------------


def read_corpus_tsv(path: str) -> Iterator[Document]:
    """MSMARCO-style TSV: one document per line, ``id<TAB>text``."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected id<TAB>text")
            yield Document(parts[0], parts[1])


def read_corpus_jsonl(path: str) -> Iterator[Document]:
    """Line-delimited records with fields ``id`` and ``text``."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON") from exc
            if "id" not in rec or "text" not in rec:
                raise FormatError(f"{path}:{lineno}: missing 'id' or 'text'")
            yield Document(str(rec["id"]), str(rec["text"]))
