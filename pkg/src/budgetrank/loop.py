"""The budgeted adaptive reranking loop.

Per query: build the candidate pool, assemble (and optionally standardize)
features, then repeatedly pick the highest-estimated-utility batch of
unscored documents, score it with the teacher against the original query,
and refit the surrogate, until the reranking budget or the pool is
exhausted. The expansion feature can be refreshed between batches from the
top teacher-scored documents so far.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import AnalyzerConfig
from .errors import BudgetRankError, TeacherError
from .index import DEFAULT_B, DEFAULT_K1, Index, RankedList, ranked_list
from .pool import (
    build_pool,
    feature_labels,
    feature_matrix,
    refresh_rm3_column,
    standardize,
)
from .prf import (
    FeedbackSet,
    WeightedQuery,
    relevance_model,
    rm3_expand,
    weighted_query_from_text,
)
from .reformulate import ReformulationSet
from .surrogate import DEFAULT_RIDGE, Observation, SurrogateModel, estimation_error
from .teachers import Teacher


@dataclass(frozen=True)
class LoopConfig:
    batch_size: int = 16
    budget: int = 100
    feedback_size: int = 15          # |S|: docs feeding the expansion model
    fb_terms: int = 10
    original_query_weight: float = 0.3
    ridge: float = DEFAULT_RIDGE
    seed: int = 0
    rm3_refresh: bool = True
    standardize: bool = True
    batch_only: bool = False
    k: int = 100                     # retrieval depth per query
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.feedback_size < 1:
            raise ValueError("feedback_size must be >= 1")


@dataclass(frozen=True)
class BatchTrace:
    batch_index: int
    doc_ids: tuple[str, ...]
    mean_error: float        # mean estimation error on this batch, pre-update
    duration_ms: float


@dataclass
class RunResult:
    query_id: str
    scored: list[tuple[str, float, int]]    # (doc id, teacher score, batch)
    final_ranking: RankedList
    weights: np.ndarray
    feature_names: list[str]
    trace: list[BatchTrace]
    pool_size: int
    failed: bool = False
    error: str = ""
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def teacher_calls(self) -> int:
        return len(self.scored)


def select_batch(
    unscored: list[str],
    utilities: dict[str, float],
    batch_size: int,
    remaining_budget: int,
) -> list[str]:
    """Top documents by (utility desc, doc id asc), truncated to the
    remaining budget."""
    take = min(batch_size, remaining_budget, len(unscored))
    if take <= 0:
        return []
    ordered = sorted(unscored, key=lambda d: (-utilities[d], d))
    return ordered[:take]


def _expanded_query(
    index: Index,
    original_wq: WeightedQuery,
    feedback: FeedbackSet,
    config: LoopConfig,
) -> WeightedQuery | None:
    try:
        model = relevance_model(index, feedback, config.fb_terms)
    except BudgetRankError:
        return None
    if not original_wq.terms:
        return model
    return rm3_expand(original_wq, model, config.original_query_weight)


def run_adaptive(
    index: Index,
    query_id: str,
    query: str,
    reforms: ReformulationSet,
    teacher: Teacher,
    config: LoopConfig = LoopConfig(),
    analyzer: AnalyzerConfig | None = None,
) -> RunResult:
    """Execute the full budgeted loop for one query."""
    cfg_analyzer = analyzer if analyzer is not None else index.analyzer
    timings = {"retrieval_ms": 0.0, "features_ms": 0.0, "teacher_ms": 0.0,
               "update_ms": 0.0, "total_ms": 0.0}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    pool = build_pool(
        index, query, reforms, config.k, cfg_analyzer, config.k1, config.b
    )
    timings["retrieval_ms"] = (time.perf_counter() - t0) * 1000.0

    original_wq = weighted_query_from_text(query, cfg_analyzer)
    r0 = pool.source_lists[0]
    q_prime: WeightedQuery | None = None
    if len(r0) > 0:
        seed_feedback = FeedbackSet(
            tuple(
                (e.doc_id, e.score) for e in r0.entries[: config.feedback_size]
            )
        )
        q_prime = _expanded_query(index, original_wq, seed_feedback, config)

    t0 = time.perf_counter()
    fm = feature_matrix(
        index, pool, query, reforms, q_prime, cfg_analyzer, config.k1, config.b
    )
    if config.standardize and len(pool) > 0:
        standardize(fm)
    timings["features_ms"] = (time.perf_counter() - t0) * 1000.0

    model = SurrogateModel.create(
        reforms.m + 2, config.seed, config.ridge, config.batch_only
    )
    labels = feature_labels(reforms.m)

    target = min(config.budget, len(pool))
    scored: list[tuple[str, float, int]] = []
    unscored: set[str] = set(pool.members)
    trace: list[BatchTrace] = []
    failed = False
    error = ""
    batch_index = 0

    while len(scored) < target:
        batch_index += 1
        t_batch = time.perf_counter()
        unscored_ids = sorted(unscored)
        rows = fm.values[[fm.row_index(d) for d in unscored_ids]]
        utils = dict(zip(unscored_ids, model.utilities(rows)))
        batch = select_batch(
            unscored_ids, utils, config.batch_size, target - len(scored)
        )
        batch_rows = fm.values[[fm.row_index(d) for d in batch]]

        t0 = time.perf_counter()
        try:
            ys = teacher.score_batch(query, batch, batch_rows)
        except TeacherError as exc:
            failed = True
            error = str(exc)
            break
        timings["teacher_ms"] += (time.perf_counter() - t0) * 1000.0

        mean_error = float(
            np.mean(
                [estimation_error(model.w, x, y) for x, y in zip(batch_rows, ys)]
            )
        )

        t0 = time.perf_counter()
        model.update(
            [
                Observation(d, x, float(y), batch_index)
                for d, x, y in zip(batch, batch_rows, ys)
            ]
        )
        timings["update_ms"] += (time.perf_counter() - t0) * 1000.0

        scored.extend((d, float(y), batch_index) for d, y in zip(batch, ys))
        unscored.difference_update(batch)

        if config.rm3_refresh and unscored and len(scored) < target:
            top_s = sorted(scored, key=lambda r: (-r[1], r[0]))
            feedback = FeedbackSet(
                tuple((d, y) for d, y, _ in top_s[: config.feedback_size])
            )
            refreshed = _expanded_query(index, original_wq, feedback, config)
            if refreshed is not None:
                q_prime = refreshed
                refresh_rm3_column(
                    fm, index, q_prime, sorted(unscored), config.k1, config.b
                )

        trace.append(
            BatchTrace(
                batch_index=batch_index,
                doc_ids=tuple(batch),
                mean_error=mean_error,
                duration_ms=(time.perf_counter() - t_batch) * 1000.0,
            )
        )

    final = ranked_list(query_id, [(d, y) for d, y, _ in scored])
    timings["total_ms"] = (time.perf_counter() - t_start) * 1000.0
    return RunResult(
        query_id=query_id,
        scored=scored,
        final_ranking=final,
        weights=model.w.copy(),
        feature_names=labels,
        trace=trace,
        pool_size=len(pool),
        failed=failed,
        error=error,
        timings_ms=timings,
    )
