"""Experiment orchestration: config parsing, per-query runs, artifacts.

Configs are INI files (sections of key/value pairs); any value can be
overridden on the command line as ``--set section.key=value``. Artifacts are
written under ``<output.dir>/<config-hash>/`` so distinct configs never
clobber each other, and every artifact carries the config hash and seed.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import AnalyzerConfig, load_stopwords
from .baselines import BASELINE_KINDS, BaselineSpec, run_baseline
from .errors import ConfigError, FormatError
from .evaluation import (
    Qrels,
    evaluate_run,
    load_qrels,
    write_run,
)
from .index import Document, Index, build_index, load_index, read_corpus_jsonl, read_corpus_tsv
from .loop import LoopConfig, RunResult, run_adaptive
from .reformulate import (
    GeneratorConfig,
    ReformulationSet,
    load_reformulation_file,
    make_reformulation_set,
    reformulate_http,
)
from .surrogate import weight_dump_lines
from .teachers import CachedTeacher, HttpTeacher, LinearTeacher, QrelsTeacher, Teacher

PIPELINE_KINDS = ("adaptive",) + BASELINE_KINDS


@dataclass
class ExperimentConfig:
    # data
    corpus_path: str = ""
    corpus_format: str = "tsv"          # tsv | jsonl
    index_path: str = ""                # optional prebuilt index
    queries_path: str = ""
    qrels_path: str = ""
    stopwords_path: str = ""
    # analyzer
    lowercase: bool = True
    stemming: bool = True
    use_stopwords: bool = True
    # reformulations
    reform_source: str = "file"         # file | http | none
    reform_path: str = ""
    reform_http: GeneratorConfig | None = None
    # teacher
    teacher_kind: str = "qrels"         # qrels | http | cached | linear
    teacher_endpoint: str = ""
    teacher_path: str = ""
    teacher_max_grade: int = 1
    teacher_noise_sigma: float = 0.0
    teacher_w_star: tuple[float, ...] = ()
    # pipeline
    pipeline: str = "adaptive"
    loop: LoopConfig = field(default_factory=LoopConfig)
    k_rrf: float = 60.0
    concat_repetitions: int = 1
    # sweep
    m_sweep: tuple[int, ...] = ()
    sweep_baselines: tuple[str, ...] = ("rrf_rerank",)
    # output
    output_dir: str = "out"
    tag: str = "run"
    cutoffs: tuple[int, ...] = (50, 100)

    def validate(self) -> None:
        if self.pipeline not in PIPELINE_KINDS:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.corpus_format not in ("tsv", "jsonl"):
            raise ConfigError(f"unknown corpus format {self.corpus_format!r}")
        if not self.corpus_path and not self.index_path:
            raise ConfigError("either data.corpus or data.index is required")
        for label, path in (
            ("data.corpus", self.corpus_path),
            ("data.index", self.index_path),
            ("data.queries", self.queries_path),
            ("data.qrels", self.qrels_path),
            ("data.stopwords", self.stopwords_path),
            ("reformulations.path", self.reform_path),
        ):
            if path and not os.path.exists(path):
                raise ConfigError(f"{label}: path does not exist: {path}")
        if not self.queries_path:
            raise ConfigError("data.queries is required")
        if self.teacher_kind == "qrels" and not self.qrels_path:
            raise ConfigError("teacher.kind=qrels requires data.qrels")
        if self.teacher_kind == "http" and not self.teacher_endpoint:
            raise ConfigError("teacher.kind=http requires teacher.endpoint")
        if self.teacher_kind == "cached" and not self.teacher_path:
            raise ConfigError("teacher.kind=cached requires teacher.path")
        if self.teacher_kind == "linear" and not self.teacher_w_star:
            raise ConfigError("teacher.kind=linear requires teacher.w_star")
        if any(m < 0 for m in self.m_sweep):
            raise ConfigError("sweep.m_values entries must be >= 0")
        for kind in self.sweep_baselines:
            if kind not in BASELINE_KINDS:
                raise ConfigError(f"unknown sweep baseline {kind!r}")

    def config_hash(self) -> str:
        payload = json.dumps(_as_plain_dict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _as_plain_dict(obj) -> dict:
    out = {}
    for key, value in vars(obj).items():
        if hasattr(value, "__dataclass_fields__"):
            out[key] = _as_plain_dict(value)
        else:
            out[key] = value
    return out


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _to_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _BOOL_TRUE:
        return True
    if v in _BOOL_FALSE:
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def load_experiment_config(
    path: str | None, overrides: list[str] | None = None
) -> ExperimentConfig:
    """Read an INI config and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file does not exist: {path}")
        parser.read(path)
    for override in overrides or []:
        if "=" not in override or "." not in override.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {override!r}")
        dotted, value = override.split("=", 1)
        section, key = dotted.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    return _config_from_parser(parser)


def _config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    def get(section: str, key: str, default: str = "") -> str:
        return parser.get(section, key, fallback=default)

    def get_bool(section: str, key: str, default: bool) -> bool:
        raw = parser.get(section, key, fallback=None)
        return default if raw is None else _to_bool(raw)

    def get_int(section: str, key: str, default: int) -> int:
        raw = parser.get(section, key, fallback=None)
        return default if raw is None else int(raw)

    def get_float(section: str, key: str, default: float) -> float:
        raw = parser.get(section, key, fallback=None)
        return default if raw is None else float(raw)

    def get_int_list(section: str, key: str) -> tuple[int, ...]:
        raw = parser.get(section, key, fallback="")
        return tuple(int(v) for v in raw.replace(",", " ").split()) if raw else ()

    loop_defaults = LoopConfig()
    loop = LoopConfig(
        batch_size=get_int("loop", "batch_size", loop_defaults.batch_size),
        budget=get_int("loop", "budget", loop_defaults.budget),
        feedback_size=get_int("loop", "feedback_size", loop_defaults.feedback_size),
        fb_terms=get_int("loop", "fb_terms", loop_defaults.fb_terms),
        original_query_weight=get_float(
            "loop", "original_query_weight", loop_defaults.original_query_weight
        ),
        ridge=get_float("loop", "ridge", loop_defaults.ridge),
        seed=get_int("loop", "seed", loop_defaults.seed),
        rm3_refresh=get_bool("loop", "rm3_refresh", loop_defaults.rm3_refresh),
        standardize=get_bool("loop", "standardize", loop_defaults.standardize),
        batch_only=get_bool("loop", "batch_only", loop_defaults.batch_only),
        k=get_int("loop", "k", loop_defaults.k),
        k1=get_float("loop", "k1", loop_defaults.k1),
        b=get_float("loop", "b", loop_defaults.b),
    )

    http_gen: GeneratorConfig | None = None
    if get("reformulations", "source", "file") == "http":
        defaults = GeneratorConfig(mode="http")
        http_gen = GeneratorConfig(
            mode="http",
            n_requested=get_int("reformulations", "n", defaults.n_requested),
            temperature=get_float(
                "reformulations", "temperature", defaults.temperature
            ),
            max_tokens=get_int("reformulations", "max_tokens", defaults.max_tokens),
            prompt_template=get(
                "reformulations", "prompt_template", defaults.prompt_template
            ),
            endpoint=get("reformulations", "endpoint"),
            model=get("reformulations", "model"),
            api_key_env=get("reformulations", "api_key_env"),
            retries=get_int("reformulations", "retries", defaults.retries),
        )

    w_star_raw = get("teacher", "w_star")
    w_star = (
        tuple(float(v) for v in w_star_raw.replace(",", " ").split())
        if w_star_raw
        else ()
    )

    return ExperimentConfig(
        corpus_path=get("data", "corpus"),
        corpus_format=get("data", "format", "tsv"),
        index_path=get("data", "index"),
        queries_path=get("data", "queries"),
        qrels_path=get("data", "qrels"),
        stopwords_path=get("data", "stopwords"),
        lowercase=get_bool("analyzer", "lowercase", True),
        stemming=get_bool("analyzer", "stemming", True),
        use_stopwords=get_bool("analyzer", "use_stopwords", True),
        reform_source=get("reformulations", "source", "file"),
        reform_path=get("reformulations", "path"),
        reform_http=http_gen,
        teacher_kind=get("teacher", "kind", "qrels"),
        teacher_endpoint=get("teacher", "endpoint"),
        teacher_path=get("teacher", "path"),
        teacher_max_grade=get_int("teacher", "max_grade", 1),
        teacher_noise_sigma=get_float("teacher", "noise_sigma", 0.0),
        teacher_w_star=w_star,
        pipeline=get("pipeline", "kind", "adaptive"),
        loop=loop,
        k_rrf=get_float("pipeline", "k_rrf", 60.0),
        concat_repetitions=get_int("pipeline", "concat_repetitions", 1),
        m_sweep=get_int_list("sweep", "m_values"),
        sweep_baselines=tuple(
            get("sweep", "baselines", "rrf_rerank").replace(",", " ").split()
        ),
        output_dir=get("output", "dir", "out"),
        tag=get("output", "tag", "run"),
        cutoffs=get_int_list("output", "cutoffs") or (50, 100),
    )


# ---------------------------------------------------------------------------
# Input loading.
# ---------------------------------------------------------------------------


def load_queries(path: str) -> list[tuple[str, str]]:
    """TSV ``qid<TAB>text``; order preserved; duplicate qids rejected."""
    queries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected qid<TAB>text")
            qid, text = parts
            if qid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate query id {qid!r}")
            seen.add(qid)
            queries.append((qid, text))
    return queries


def build_analyzer(config: ExperimentConfig) -> AnalyzerConfig:
    if config.stopwords_path:
        stopwords = load_stopwords(config.stopwords_path)
    elif config.use_stopwords:
        stopwords = AnalyzerConfig().stopwords
    else:
        stopwords = frozenset()
    return AnalyzerConfig(
        lowercase=config.lowercase, stopwords=stopwords, stemming=config.stemming
    )


def load_corpus(config: ExperimentConfig) -> list[Document]:
    reader = read_corpus_tsv if config.corpus_format == "tsv" else read_corpus_jsonl
    return list(reader(config.corpus_path))


def build_or_load_index(
    config: ExperimentConfig, analyzer: AnalyzerConfig
) -> tuple[Index, dict[str, str]]:
    doc_texts: dict[str, str] = {}
    if config.corpus_path:
        docs = load_corpus(config)
        doc_texts = {d.id: d.text for d in docs}
    if config.index_path:
        return load_index(config.index_path), doc_texts
    return build_index(docs, analyzer), doc_texts


def make_teacher(
    config: ExperimentConfig,
    query_id: str,
    qrels: Qrels | None,
    doc_texts: dict[str, str],
    seed: int,
) -> Teacher:
    if config.teacher_kind == "qrels":
        assert qrels is not None
        grades = {
            d: g for (q, d), g in qrels.judgments.items() if q == query_id
        }
        return QrelsTeacher(
            grades,
            max_grade=config.teacher_max_grade,
            noise_sigma=config.teacher_noise_sigma,
            seed=seed,
        )
    if config.teacher_kind == "http":
        return HttpTeacher(config.teacher_endpoint, doc_texts)
    if config.teacher_kind == "cached":
        return CachedTeacher.from_file(config.teacher_path)
    if config.teacher_kind == "linear":
        return LinearTeacher(
            np.array(config.teacher_w_star),
            noise_sigma=config.teacher_noise_sigma,
            seed=seed,
        )
    raise ConfigError(f"unknown teacher kind {config.teacher_kind!r}")


def get_reformulations(
    config: ExperimentConfig,
    query_id: str,
    query: str,
    canned: dict[str, list[str]] | None,
) -> ReformulationSet:
    if config.reform_source == "none":
        return make_reformulation_set(query_id, query, [], generator_tag="none")
    if config.reform_source == "file":
        assert canned is not None
        if query_id not in canned:
            return make_reformulation_set(
                query_id, query, [], generator_tag="file", missing=True
            )
        return make_reformulation_set(
            query_id, query, canned[query_id], generator_tag="file"
        )
    if config.reform_source == "http":
        assert config.reform_http is not None
        return reformulate_http(config.reform_http, query, query_id)
    raise ConfigError(f"unknown reformulation source {config.reform_source!r}")


# ---------------------------------------------------------------------------
# Experiment driver.
# ---------------------------------------------------------------------------


@dataclass
class ExperimentOutcome:
    out_dir: str
    config_hash: str
    results: dict[str, RunResult]
    failed_queries: list[str]
    warnings: list[str]
    metrics: dict[str, float]


def _run_one(
    config: ExperimentConfig,
    index: Index,
    analyzer: AnalyzerConfig,
    query_id: str,
    query: str,
    reforms: ReformulationSet,
    teacher: Teacher,
) -> RunResult:
    if config.pipeline == "adaptive":
        return run_adaptive(
            index, query_id, query, reforms, teacher, config.loop, analyzer
        )
    spec = BaselineSpec(
        kind=config.pipeline,
        budget=config.loop.budget,
        k=config.loop.k,
        k_rrf=config.k_rrf,
        fb_docs=5,
        fb_terms=config.loop.fb_terms,
        original_query_weight=config.loop.original_query_weight,
        concat_repetitions=config.concat_repetitions,
        batch_size=config.loop.batch_size,
        k1=config.loop.k1,
        b=config.loop.b,
    )
    return run_baseline(index, query_id, query, reforms, teacher, spec, analyzer)


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    config.validate()
    cfg_hash = config.config_hash()
    out_dir = os.path.join(config.output_dir, cfg_hash)
    os.makedirs(out_dir, exist_ok=True)
    run_tag = f"{config.tag}.{cfg_hash}.s{config.loop.seed}"

    analyzer = build_analyzer(config)
    index, doc_texts = build_or_load_index(config, analyzer)
    queries = load_queries(config.queries_path)
    qrels = load_qrels(config.qrels_path) if config.qrels_path else None
    canned = (
        load_reformulation_file(config.reform_path)
        if config.reform_source == "file" and config.reform_path
        else None
    )

    warnings: list[str] = []
    results: dict[str, RunResult] = {}
    failed: list[str] = []
    for qid, text in queries:
        reforms = get_reformulations(config, qid, text, canned)
        if config.pipeline in ("base_rerank", "rm3_rerank") and reforms.m > 0:
            warnings.append(
                f"{qid}: pipeline {config.pipeline} ignores "
                f"{reforms.m} reformulations"
            )
        teacher = make_teacher(config, qid, qrels, doc_texts, config.loop.seed)
        result = _run_one(config, index, analyzer, qid, text, reforms, teacher)
        results[qid] = result
        if result.failed:
            failed.append(qid)

    ok_results = {q: r for q, r in results.items() if not r.failed}
    _write_artifacts(out_dir, run_tag, cfg_hash, config, results, ok_results)

    metrics: dict[str, float] = {}
    if qrels is not None and ok_results:
        runs = {q: r.final_ranking for q, r in ok_results.items()}
        for cutoff in config.cutoffs:
            for metric in ("ndcg", "recall"):
                rep = evaluate_run(runs, qrels, metric, cutoff, run_tag)
                metrics[f"{metric}@{cutoff}"] = rep.mean
        with open(os.path.join(out_dir, "metrics.tsv"), "w", encoding="utf-8") as fh:
            fh.write(f"# config_hash={cfg_hash} seed={config.loop.seed}\n")
            for name in sorted(metrics):
                fh.write(f"{name}\t{metrics[name]:.6f}\n")

    return ExperimentOutcome(out_dir, cfg_hash, results, failed, warnings, metrics)


def _write_artifacts(
    out_dir: str,
    run_tag: str,
    cfg_hash: str,
    config: ExperimentConfig,
    results: dict[str, RunResult],
    ok_results: dict[str, RunResult],
) -> None:
    seed = config.loop.seed
    write_run(
        os.path.join(out_dir, "run.trec"),
        [ok_results[q].final_ranking for q in sorted(ok_results)],
        run_tag,
    )

    with open(os.path.join(out_dir, "weights.tsv"), "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg_hash} seed={seed}\n")
        for qid in sorted(ok_results):
            result = ok_results[qid]
            if len(result.weights):
                for line in weight_dump_lines(
                    qid, result.weights, result.feature_names
                ):
                    fh.write(line + "\n")

    with open(os.path.join(out_dir, "trace.jsonl"), "w", encoding="utf-8") as fh:
        for qid in sorted(results):
            for t in results[qid].trace:
                fh.write(
                    json.dumps(
                        {
                            "config_hash": cfg_hash,
                            "seed": seed,
                            "qid": qid,
                            "batch": t.batch_index,
                            "mean_error": t.mean_error,
                            "doc_ids": list(t.doc_ids),
                        }
                    )
                    + "\n"
                )

    phases = ["retrieval_ms", "features_ms", "teacher_ms", "update_ms", "total_ms"]
    with open(os.path.join(out_dir, "timings.tsv"), "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg_hash} seed={seed}\n")
        fh.write("qid\t" + "\t".join(phases) + "\n")
        for qid in sorted(results):
            t = results[qid].timings_ms
            fh.write(
                qid + "\t" + "\t".join(f"{t.get(p, 0.0):.3f}" for p in phases) + "\n"
            )
        totals = [results[q].timings_ms.get("total_ms", 0.0) for q in results]
        if totals:
            mean = statistics.fmean(totals)
            std = statistics.pstdev(totals) if len(totals) > 1 else 0.0
            fh.write(f"#mean_total\t{mean:.3f}\n#std_total\t{std:.3f}\n")

    summary = {
        "config_hash": cfg_hash,
        "seed": seed,
        "tag": run_tag,
        "pipeline": config.pipeline,
        "queries": len(results),
        "failed_queries": sorted(q for q, r in results.items() if r.failed),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Reformulation-count sweep.
# ---------------------------------------------------------------------------


def sweep_reformulations(config: ExperimentConfig) -> tuple[str, list[dict]]:
    """Run the main pipeline and the designated baselines for each m in the
    sweep list, truncating each query's reformulation set to its first m
    entries. Emits a plot-ready CSV ``m,pipeline,metric,value``."""
    config.validate()
    if not config.m_sweep:
        raise ConfigError("sweep.m_values is empty")
    if config.reform_source != "file" or not config.reform_path:
        raise ConfigError("sweep requires a canned reformulation file")
    if not config.qrels_path:
        raise ConfigError("sweep requires qrels for metrics")

    cfg_hash = config.config_hash()
    out_dir = os.path.join(config.output_dir, cfg_hash)
    os.makedirs(out_dir, exist_ok=True)

    analyzer = build_analyzer(config)
    index, doc_texts = build_or_load_index(config, analyzer)
    queries = load_queries(config.queries_path)
    qrels = load_qrels(config.qrels_path)
    canned = load_reformulation_file(config.reform_path)
    max_m = max(config.m_sweep)

    pipelines = ["adaptive"] + list(config.sweep_baselines)
    rows: list[dict] = []
    for m in config.m_sweep:
        insufficient = [
            qid for qid, _ in queries if len(canned.get(qid, [])) < m
        ]
        if insufficient:
            rows.append(
                {"m": m, "pipeline": "-", "metric": "skipped",
                 "value": float("nan")}
            )
            continue
        for pipeline in pipelines:
            sub_config = replace(config, pipeline=pipeline)
            runs = {}
            for qid, text in queries:
                reforms = make_reformulation_set(
                    qid, text, canned.get(qid, []), generator_tag="file"
                ).truncated(m)
                teacher = make_teacher(
                    sub_config, qid, qrels, doc_texts, config.loop.seed
                )
                result = _run_one(
                    sub_config, index, analyzer, qid, text, reforms, teacher
                )
                if not result.failed:
                    runs[qid] = result.final_ranking
            for cutoff in config.cutoffs:
                for metric in ("ndcg", "recall"):
                    rep = evaluate_run(runs, qrels, metric, cutoff, pipeline)
                    rows.append(
                        {
                            "m": m,
                            "pipeline": pipeline,
                            "metric": f"{metric}@{cutoff}",
                            "value": rep.mean,
                        }
                    )

    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg_hash} seed={config.loop.seed}\n")
        fh.write("m,pipeline,metric,value\n")
        for row in rows:
            value = row["value"]
            rendered = "nan" if isinstance(value, float) and math.isnan(value) else f"{value:.6f}"
            fh.write(f"{row['m']},{row['pipeline']},{row['metric']},{rendered}\n")
    return csv_path, rows
