"""Deterministic synthetic worlds with disjoint topic vocabularies.

Used to study recall/drift behavior at desk scale: each topic owns its own
vocabulary, documents are term bags drawn from one topic, and queries carry
a handful of terms from their topic. Relevance is topic membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .index import Document


@dataclass(frozen=True)
class TopicWorldSpec:
    n_topics: int = 4
    docs_per_topic: int = 100
    vocab_per_topic: int = 60
    doc_len_min: int = 15
    doc_len_max: int = 40
    query_len: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.docs_per_topic < 1 or self.vocab_per_topic < 1:
            raise ValueError("docs_per_topic and vocab_per_topic must be >= 1")
        if not 1 <= self.doc_len_min <= self.doc_len_max:
            raise ValueError("invalid document length range")
        if self.query_len < 1:
            raise ValueError("query_len must be >= 1")


@dataclass
class TopicWorld:
    spec: TopicWorldSpec
    vocabularies: list[list[str]]           # per topic, pairwise disjoint
    docs: list[Document]
    doc_topic: dict[str, int]
    queries: list[tuple[str, str, int]]     # (qid, text, topic)
    qrels: dict[tuple[str, str], int] = field(default_factory=dict)

    def relevant_docs(self, topic: int) -> list[str]:
        return sorted(d for d, t in self.doc_topic.items() if t == topic)


def _zipf_probs(n: int) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=float)
    p = 1.0 / ranks
    return p / p.sum()


def simulate_world(spec: TopicWorldSpec, queries_per_topic: int = 1) -> TopicWorld:
    """Generate a corpus, queries, and qrels; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    vocabularies = [
        [f"t{t}w{j}" for j in range(spec.vocab_per_topic)]
        for t in range(spec.n_topics)
    ]
    probs = _zipf_probs(spec.vocab_per_topic)

    docs: list[Document] = []
    doc_topic: dict[str, int] = {}
    for t in range(spec.n_topics):
        vocab = np.array(vocabularies[t])
        for i in range(spec.docs_per_topic):
            length = int(rng.integers(spec.doc_len_min, spec.doc_len_max + 1))
            terms = rng.choice(vocab, size=length, p=probs)
            doc_id = f"d{t:02d}-{i:04d}"
            docs.append(Document(doc_id, " ".join(terms)))
            doc_topic[doc_id] = t

    queries: list[tuple[str, str, int]] = []
    qrels: dict[tuple[str, str], int] = {}
    for t in range(spec.n_topics):
        vocab = np.array(vocabularies[t])
        for i in range(queries_per_topic):
            q_terms = rng.choice(
                vocab, size=min(spec.query_len, spec.vocab_per_topic),
                replace=False, p=probs,
            )
            qid = f"q{t:02d}-{i:02d}"
            queries.append((qid, " ".join(q_terms), t))
            for doc_id, topic in doc_topic.items():
                if topic == t:
                    qrels[(qid, doc_id)] = 1

    return TopicWorld(spec, vocabularies, docs, doc_topic, queries, qrels)
