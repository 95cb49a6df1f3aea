"""Reference pipelines sharing the loop's teacher budget accounting.

Four kinds: plain retrieve-then-rerank, RM3-expanded retrieve-then-rerank,
reciprocal-rank fusion over per-reformulation lists, and retrieval with the
original query concatenated to all reformulations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .analysis import AnalyzerConfig
from .errors import TeacherError
from .index import DEFAULT_B, DEFAULT_K1, Index, RankedList, ranked_list, search
from .loop import BatchTrace, RunResult
from .pool import build_pool
from .prf import (
    FeedbackSet,
    relevance_model,
    rm3_expand,
    search_weighted,
    weighted_query_from_text,
)
from .reformulate import ReformulationSet
from .teachers import Teacher

BASELINE_KINDS = ("base_rerank", "rm3_rerank", "rrf_rerank", "concat_rerank")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str = "base_rerank"
    budget: int = 100
    k: int = 100
    k_rrf: float = 60.0
    fb_docs: int = 5
    fb_terms: int = 10
    original_query_weight: float = 0.3
    concat_repetitions: int = 1     # copies of the original query when joining
    batch_size: int = 16
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.k_rrf <= 0:
            raise ValueError("k_rrf must be > 0")


def rrf_fuse(
    lists: list[RankedList], k_rrf: float = 60.0, query_id: str = ""
) -> RankedList:
    """Reciprocal-rank fusion: score(d) = sum over lists of 1/(k_rrf + rank)."""
    if not lists:
        raise ValueError("rrf_fuse requires at least one list")
    scores: dict[str, float] = {}
    for lst in lists:
        for entry in lst.entries:
            scores[entry.doc_id] = (
                scores.get(entry.doc_id, 0.0) + 1.0 / (k_rrf + entry.rank)
            )
    return ranked_list(query_id, scores.items())


def _candidate_list(
    index: Index,
    query_id: str,
    query: str,
    reforms: ReformulationSet,
    spec: BaselineSpec,
    analyzer: AnalyzerConfig,
) -> RankedList:
    if spec.kind == "base_rerank":
        return search(
            index, query, spec.k, analyzer, spec.k1, spec.b, query_id=query_id
        )
    if spec.kind == "rm3_rerank":
        first_pass = search(
            index, query, spec.k, analyzer, spec.k1, spec.b, query_id=query_id
        )
        if len(first_pass) == 0:
            return first_pass
        feedback = FeedbackSet(
            tuple(
                (e.doc_id, e.score) for e in first_pass.entries[: spec.fb_docs]
            )
        )
        model = relevance_model(index, feedback, spec.fb_terms)
        original_wq = weighted_query_from_text(query, analyzer)
        expanded = (
            rm3_expand(original_wq, model, spec.original_query_weight)
            if original_wq.terms
            else model
        )
        return search_weighted(
            index, expanded, spec.k, spec.k1, spec.b, query_id=query_id
        )
    if spec.kind == "rrf_rerank":
        pool = build_pool(
            index, query, reforms, spec.k, analyzer, spec.k1, spec.b
        )
        lists = [pool.source_lists[i] for i in sorted(pool.source_lists)]
        return rrf_fuse(lists, spec.k_rrf, query_id=query_id)
    # concat_rerank
    combined = " ".join([query] * spec.concat_repetitions + list(reforms.reformulations))
    return search(
        index, combined, spec.k, analyzer, spec.k1, spec.b, query_id=query_id
    )


def run_baseline(
    index: Index,
    query_id: str,
    query: str,
    reforms: ReformulationSet,
    teacher: Teacher,
    spec: BaselineSpec,
    analyzer: AnalyzerConfig | None = None,
) -> RunResult:
    """Teacher-score the top-budget of the baseline's candidate list, with
    the same batching, trace, and budget accounting as the adaptive loop."""
    cfg_analyzer = analyzer if analyzer is not None else index.analyzer
    timings = {"retrieval_ms": 0.0, "features_ms": 0.0, "teacher_ms": 0.0,
               "update_ms": 0.0, "total_ms": 0.0}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    candidates = _candidate_list(index, query_id, query, reforms, spec, cfg_analyzer)
    timings["retrieval_ms"] = (time.perf_counter() - t0) * 1000.0

    target = min(spec.budget, len(candidates))
    ordered = candidates.doc_ids()[:target]
    scored: list[tuple[str, float, int]] = []
    trace: list[BatchTrace] = []
    failed = False
    error = ""
    for batch_index, start in enumerate(range(0, target, spec.batch_size), start=1):
        batch = ordered[start : start + spec.batch_size]
        t_batch = time.perf_counter()
        try:
            ys = teacher.score_batch(query, batch, None)
        except TeacherError as exc:
            failed = True
            error = str(exc)
            break
        timings["teacher_ms"] += (time.perf_counter() - t_batch) * 1000.0
        scored.extend((d, float(y), batch_index) for d, y in zip(batch, ys))
        trace.append(
            BatchTrace(
                batch_index=batch_index,
                doc_ids=tuple(batch),
                mean_error=0.0,
                duration_ms=(time.perf_counter() - t_batch) * 1000.0,
            )
        )

    final = ranked_list(query_id, [(d, y) for d, y, _ in scored])
    timings["total_ms"] = (time.perf_counter() - t_start) * 1000.0
    return RunResult(
        query_id=query_id,
        scored=scored,
        final_ranking=final,
        weights=np.zeros(0),
        feature_names=[],
        trace=trace,
        pool_size=len(candidates),
        failed=failed,
        error=error,
        timings_ms=timings,
    )
