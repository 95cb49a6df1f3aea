"""Effectiveness metrics, significance testing, and report assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from scipy import stats

from .errors import FormatError
from .index import RankedEntry, RankedList


@dataclass
class Qrels:
    """Graded judgments keyed by (query id, doc id)."""

    judgments: dict[tuple[str, str], int]
    binarization_threshold: int = 1

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get((query_id, doc_id), 0)

    def relevant_docs(self, query_id: str) -> set[str]:
        return {
            d
            for (q, d), g in self.judgments.items()
            if q == query_id and g >= self.binarization_threshold
        }

    def judged_queries(self) -> set[str]:
        return {q for q, _ in self.judgments}


def load_qrels(path: str, binarization_threshold: int = 1) -> Qrels:
    """TREC qrels format: ``qid 0 docid grade``."""
    judgments: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                judgments[(parts[0], parts[2])] = int(parts[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad grade") from exc
    return Qrels(judgments, binarization_threshold)


def save_qrels(path: str, qrels: Qrels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (qid, docid), grade in sorted(qrels.judgments.items()):
            fh.write(f"{qid} 0 {docid} {grade}\n")


def recall_at(run: RankedList, qrels: Qrels, c: int) -> float | None:
    """Fraction of relevant documents inside the top-c; None when the query
    has no relevant documents after binarization (caller skips it)."""
    relevant = qrels.relevant_docs(run.query_id)
    if not relevant:
        return None
    retrieved = {e.doc_id for e in run.entries[:c]}
    return len(relevant & retrieved) / len(relevant)


def ndcg_at(
    run: RankedList, qrels: Qrels, c: int, exponential_gain: bool = False
) -> float | None:
    """Linear-gain nDCG with log2(i+1) discount (trec_eval ndcg_cut
    convention); exponential gain behind a flag. Unjudged documents
    contribute zero gain."""
    grades = {
        d: g
        for (q, d), g in qrels.judgments.items()
        if q == run.query_id and g > 0
    }
    if not grades:
        return None

    def gain(g: int) -> float:
        return float(2**g - 1) if exponential_gain else float(g)

    dcg = sum(
        gain(grades.get(e.doc_id, 0)) / math.log2(i + 2)
        for i, e in enumerate(run.entries[:c])
    )
    ideal = sorted(grades.values(), reverse=True)[:c]
    idcg = sum(gain(g) / math.log2(i + 2) for i, g in enumerate(ideal))
    return dcg / idcg if idcg > 0 else None


def paired_ttest(a: list[float], b: list[float]) -> tuple[float, float]:
    """Two-sided paired t-test on per-query values aligned by query.

    All-zero differences return (0, 1) by convention. Bonferroni correction
    is applied by the caller (p times the number of comparisons, capped at 1).
    """
    if len(a) != len(b):
        raise ValueError("paired_ttest requires equal-length inputs")
    if len(a) < 2:
        raise ValueError("paired_ttest requires at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    if all(d == 0 for d in diffs):
        return 0.0, 1.0
    result = stats.ttest_rel(a, b)
    return float(result.statistic), float(result.pvalue)


def bonferroni(p: float, n_comparisons: int) -> float:
    return min(1.0, p * n_comparisons)


# ---------------------------------------------------------------------------
# Run file I/O (TREC run format).
# ---------------------------------------------------------------------------


def write_run(path: str, runs: Iterable[RankedList], tag: str) -> None:
    """TREC run format: ``qid Q0 docid rank score tag``."""
    with open(path, "w", encoding="utf-8") as fh:
        for run in runs:
            for entry in run.entries:
                fh.write(
                    f"{run.query_id} Q0 {entry.doc_id} {entry.rank} "
                    f"{entry.score:.6f} {tag}\n"
                )


def read_run(path: str) -> dict[str, RankedList]:
    runs: dict[str, list[RankedEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields")
            qid, _, docid, rank, score, _ = parts
            runs.setdefault(qid, []).append(
                RankedEntry(docid, float(score), int(rank))
            )
    out: dict[str, RankedList] = {}
    for qid, entries in runs.items():
        entries.sort(key=lambda e: e.rank)
        out[qid] = RankedList(qid, entries)
    return out


# ---------------------------------------------------------------------------
# Aggregate reporting.
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    metric: str
    cutoff: int
    run_tag: str
    per_query: dict[str, float]
    skipped_queries: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        if not self.per_query:
            return float("nan")
        return sum(self.per_query.values()) / len(self.per_query)


def evaluate_run(
    runs: Mapping[str, RankedList],
    qrels: Qrels,
    metric: str,
    cutoff: int,
    run_tag: str = "",
) -> MetricReport:
    per_query: dict[str, float] = {}
    skipped: list[str] = []
    for qid in sorted(runs):
        if metric == "recall":
            value = recall_at(runs[qid], qrels, cutoff)
        elif metric == "ndcg":
            value = ndcg_at(runs[qid], qrels, cutoff)
        else:
            raise ValueError(f"unknown metric {metric!r}")
        if value is None:
            skipped.append(qid)
        else:
            per_query[qid] = value
    return MetricReport(metric, cutoff, run_tag, per_query, skipped)


@dataclass
class SignificanceMark:
    run_a: str
    run_b: str
    metric: str
    cutoff: int
    t_statistic: float
    p_corrected: float
    significant: bool


def report(
    runs_by_tag: Mapping[str, Mapping[str, RankedList]],
    qrels: Qrels,
    cutoffs: list[int],
    comparisons: list[tuple[str, str]] | None = None,
    alpha: float = 0.05,
) -> tuple[list[MetricReport], list[SignificanceMark]]:
    """Per-run means for each (metric, cutoff) plus pairwise significance
    (Bonferroni-corrected over all requested comparisons and cells)."""
    tags = sorted(runs_by_tag)
    if tags:
        common = set.intersection(*(set(runs_by_tag[t]) for t in tags))
        if not common:
            raise ValueError("runs share no common queries")
        mismatched = {
            tag: sorted(set(runs_by_tag[tag]) - common)[:5]
            for tag in tags
            if set(runs_by_tag[tag]) != common
        }
        if mismatched:
            raise ValueError(f"runs do not cover a common query set: {mismatched}")

    reports: list[MetricReport] = []
    table: dict[tuple[str, str, int], MetricReport] = {}
    for tag in tags:
        for metric in ("ndcg", "recall"):
            for c in cutoffs:
                rep = evaluate_run(runs_by_tag[tag], qrels, metric, c, tag)
                reports.append(rep)
                table[(tag, metric, c)] = rep

    marks: list[SignificanceMark] = []
    if comparisons:
        n_tests = len(comparisons) * 2 * len(cutoffs)
        for run_a, run_b in comparisons:
            for metric in ("ndcg", "recall"):
                for c in cutoffs:
                    rep_a = table[(run_a, metric, c)]
                    rep_b = table[(run_b, metric, c)]
                    qids = sorted(set(rep_a.per_query) & set(rep_b.per_query))
                    if len(qids) < 2:
                        continue
                    t_stat, p = paired_ttest(
                        [rep_a.per_query[q] for q in qids],
                        [rep_b.per_query[q] for q in qids],
                    )
                    p_corr = bonferroni(p, n_tests)
                    marks.append(
                        SignificanceMark(
                            run_a, run_b, metric, c, t_stat, p_corr,
                            p_corr < alpha,
                        )
                    )
    return reports, marks


def format_report_table(reports: list[MetricReport]) -> str:
    """Aligned plain-text table: one row per run tag, one column per cell."""
    cells = sorted({(r.metric, r.cutoff) for r in reports})
    tags = sorted({r.run_tag for r in reports})
    by_key = {(r.run_tag, r.metric, r.cutoff): r for r in reports}
    header = ["run"] + [f"{m}@{c}" for m, c in cells]
    rows = [header]
    for tag in tags:
        row = [tag]
        for m, c in cells:
            rep = by_key.get((tag, m, c))
            row.append(f"{rep.mean:.4f}" if rep is not None else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows
    ]
    return "\n".join(lines)
