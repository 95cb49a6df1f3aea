"""Teacher endpoints: expensive relevance scorers behind one interface.

A teacher scores a batch of documents against the ORIGINAL query and
returns one score in [0, 1] per document. Implementations: an HTTP
cross-encoder client, a synthetic linear oracle, a qrels oracle, and a
cached/file oracle. The recording wrapper asserts budget accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from .errors import FormatError, TeacherError


class Teacher(Protocol):
    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        """Scores in [0, 1], one per doc, in the order given."""
        ...


@dataclass
class LinearTeacher:
    """Synthetic oracle with linear rewards y = w*ᵀx (+ optional noise).

    ``clamp`` squashes into [0, 1]; disable it for exact linear-recovery
    experiments, where standardized features make negative scores routine.
    """

    w_star: np.ndarray
    noise_sigma: float = 0.0
    seed: int = 0
    clamp: bool = True
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = np.random.default_rng(self.seed)

    def true_score(self, x: np.ndarray) -> float:
        y = float(self.w_star @ x)
        return min(1.0, max(0.0, y)) if self.clamp else y

    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        if features is None:
            raise TeacherError("linear teacher requires feature rows")
        if features.shape[0] != len(doc_ids):
            raise TeacherError("feature row count does not match batch size")
        raw = features @ self.w_star
        if self.noise_sigma > 0.0:
            raw = raw + self._rng.normal(0.0, self.noise_sigma, size=len(doc_ids))
        if self.clamp:
            raw = np.clip(raw, 0.0, 1.0)
        return [float(v) for v in raw]


@dataclass
class QrelsTeacher:
    """Idealized oracle: normalized relevance grades for one query.

    Unjudged documents score 0. Optional Gaussian noise (seeded) turns the
    oracle into a noisy teacher; scores stay clamped to [0, 1].
    """

    grades: Mapping[str, int]
    max_grade: int = 1
    noise_sigma: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.max_grade <= 0:
            raise ValueError("max_grade must be > 0")
        self._rng = np.random.default_rng(self.seed)

    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        scores = [self.grades.get(d, 0) / self.max_grade for d in doc_ids]
        if self.noise_sigma > 0.0:
            noise = self._rng.normal(0.0, self.noise_sigma, size=len(scores))
            scores = [min(1.0, max(0.0, s + e)) for s, e in zip(scores, noise)]
        return scores


@dataclass
class CachedTeacher:
    """File-backed oracle replaying previously computed scores."""

    scores: Mapping[str, float]

    @classmethod
    def from_file(cls, path: str) -> "CachedTeacher":
        """TSV ``doc_id<TAB>score``, one per line."""
        scores: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise FormatError(f"{path}:{lineno}: expected id<TAB>score")
                try:
                    scores[parts[0]] = float(parts[1])
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad score") from exc
        return cls(scores)

    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        missing = [d for d in doc_ids if d not in self.scores]
        if missing:
            raise TeacherError(f"no cached score for documents: {missing[:5]}")
        return [self.scores[d] for d in doc_ids]


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@dataclass
class HttpTeacher:
    """Client for a cross-encoder scoring service.

    Protocol: request ``{"query": str, "documents": [{"id", "text"}]}``;
    response ``{"scores": [...], "score_semantics": "probability"|"raw"}``.
    Raw scores are squashed with a logistic; probabilities pass through.
    """

    endpoint: str
    doc_texts: Mapping[str, str]
    timeout_seconds: float = 60.0

    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        documents = []
        for d in doc_ids:
            if d not in self.doc_texts:
                raise TeacherError(f"no text available for document {d!r}")
            documents.append({"id": d, "text": self.doc_texts[d]})
        try:
            resp = requests.post(
                self.endpoint,
                json={"query": query, "documents": documents},
                timeout=self.timeout_seconds,
            )
        except requests.RequestException as exc:
            raise TeacherError(f"teacher request failed: {exc}") from exc
        if resp.status_code != 200:
            raise TeacherError(f"teacher returned status {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise TeacherError("teacher response is not JSON") from exc
        if "scores" not in body:
            raise TeacherError("teacher response missing field 'scores'")
        scores = body["scores"]
        if not isinstance(scores, list) or len(scores) != len(doc_ids):
            raise TeacherError("teacher response field 'scores' has wrong length")
        semantics = body.get("score_semantics", "probability")
        if semantics == "probability":
            return [float(s) for s in scores]
        if semantics == "raw":
            return [_logistic(float(s)) for s in scores]
        raise TeacherError(
            f"teacher response has unknown score_semantics {semantics!r}"
        )


@dataclass
class RecordingTeacher:
    """Wrapper that records every call for budget-accounting assertions."""

    inner: Teacher
    calls: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)

    def score_batch(
        self,
        query: str,
        doc_ids: Sequence[str],
        features: np.ndarray | None = None,
    ) -> list[float]:
        self.calls.append((query, tuple(doc_ids)))
        return self.inner.score_batch(query, doc_ids, features)

    @property
    def scored_doc_ids(self) -> list[str]:
        return [d for _, ids in self.calls for d in ids]

    @property
    def call_count(self) -> int:
        """Total per-document scoring events across all batches."""
        return len(self.scored_doc_ids)

    @property
    def queries_seen(self) -> set[str]:
        return {q for q, _ in self.calls}
