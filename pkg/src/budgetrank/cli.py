"""Command-line entry point.

Subcommands mirror the pipeline stages: ``index``, ``reformulate``, ``run``,
``evaluate``, ``sweep``, ``simulate``, ``dump-weights``. Exit codes: 0
success, 1 configuration error, 2 majority of queries failed, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import AnalyzerConfig, load_stopwords
from .errors import BudgetRankError, ConfigError, FormatError
from .evaluation import format_report_table, load_qrels, read_run, report
from .harness import (
    load_experiment_config,
    load_queries,
    run_experiment,
    sweep_reformulations,
)
from .index import build_index, read_corpus_jsonl, read_corpus_tsv, save_index
from .reformulate import (
    GeneratorConfig,
    reformulate_http,
    save_reformulation_file,
)
from .simulate import TopicWorldSpec, simulate_world
from .reformulate import SyntheticReformulator

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAJORITY_FAILED = 2
EXIT_IO = 3


def _cmd_index(args: argparse.Namespace) -> int:
    reader = read_corpus_tsv if args.format == "tsv" else read_corpus_jsonl
    stopwords = (
        load_stopwords(args.stopwords)
        if args.stopwords
        else (frozenset() if args.no_stopwords else AnalyzerConfig().stopwords)
    )
    config = AnalyzerConfig(
        lowercase=not args.no_lowercase,
        stopwords=stopwords,
        stemming=not args.no_stemming,
    )
    index = build_index(reader(args.corpus), config)
    save_index(index, args.out)
    print(f"indexed {index.doc_count} documents -> {args.out}")
    return EXIT_OK


def _cmd_reformulate(args: argparse.Namespace) -> int:
    config = GeneratorConfig(
        mode="http",
        n_requested=args.n,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        endpoint=args.endpoint,
        model=args.model,
        api_key_env=args.api_key_env,
        retries=args.retries,
    )
    queries = load_queries(args.queries)
    sets = []
    failures = 0
    for qid, text in queries:
        try:
            sets.append(reformulate_http(config, text, qid))
        except BudgetRankError as exc:
            print(f"warning: {qid}: {exc}", file=sys.stderr)
            failures += 1
    save_reformulation_file(args.out, sets)
    print(f"wrote {len(sets)} reformulation sets -> {args.out} "
          f"({failures} failures)")
    if queries and failures > len(queries) / 2:
        return EXIT_MAJORITY_FAILED
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config, args.set)
    outcome = run_experiment(config)
    print(f"artifacts: {outcome.out_dir}")
    for warning in outcome.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for name in sorted(outcome.metrics):
        print(f"{name}\t{outcome.metrics[name]:.4f}")
    if outcome.failed_queries:
        print(f"failed queries: {outcome.failed_queries}", file=sys.stderr)
    if outcome.results and len(outcome.failed_queries) > len(outcome.results) / 2:
        return EXIT_MAJORITY_FAILED
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    qrels = load_qrels(args.qrels, binarization_threshold=args.threshold)
    runs_by_tag = {}
    for spec in args.run:
        if "=" in spec:
            tag, path = spec.split("=", 1)
        else:
            tag, path = os.path.basename(spec), spec
        runs_by_tag[tag] = read_run(path)
    comparisons = []
    for pair in args.compare or []:
        if ":" not in pair:
            raise ConfigError(f"--compare expects tagA:tagB, got {pair!r}")
        a, b = pair.split(":", 1)
        comparisons.append((a, b))
    cutoffs = [int(c) for c in args.cutoffs.split(",")]
    reports, marks = report(runs_by_tag, qrels, cutoffs, comparisons)
    print(format_report_table(reports))
    for mark in marks:
        flag = "*" if mark.significant else " "
        print(
            f"{flag} {mark.run_a} vs {mark.run_b} {mark.metric}@{mark.cutoff}: "
            f"t={mark.t_statistic:.3f} p(corr)={mark.p_corrected:.4f}"
        )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config, args.set)
    csv_path, rows = sweep_reformulations(config)
    print(f"sweep CSV: {csv_path}")
    for row in rows:
        print(f"m={row['m']} {row['pipeline']} {row['metric']} {row['value']}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = TopicWorldSpec(
        n_topics=args.topics,
        docs_per_topic=args.docs_per_topic,
        vocab_per_topic=args.vocab_per_topic,
        doc_len_min=args.doc_len_min,
        doc_len_max=args.doc_len_max,
        query_len=args.query_len,
        seed=args.seed,
    )
    world = simulate_world(spec, queries_per_topic=args.queries_per_topic)
    os.makedirs(args.out, exist_ok=True)
    corpus_path = os.path.join(args.out, "corpus.tsv")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for doc in world.docs:
            fh.write(f"{doc.id}\t{doc.text}\n")
    queries_path = os.path.join(args.out, "queries.tsv")
    with open(queries_path, "w", encoding="utf-8") as fh:
        for qid, text, _ in world.queries:
            fh.write(f"{qid}\t{text}\n")
    qrels_path = os.path.join(args.out, "qrels.txt")
    with open(qrels_path, "w", encoding="utf-8") as fh:
        for (qid, docid), grade in sorted(world.qrels.items()):
            fh.write(f"{qid} 0 {docid} {grade}\n")
    reformulator = SyntheticReformulator(
        world, drift_fraction=args.drift, n=args.reformulations, seed=args.seed
    )
    sets = [
        reformulator.generate(qid, text, topic)
        for qid, text, topic in world.queries
    ]
    reforms_path = os.path.join(args.out, "reforms.jsonl")
    save_reformulation_file(reforms_path, sets)
    print(
        json.dumps(
            {
                "corpus": corpus_path,
                "queries": queries_path,
                "qrels": qrels_path,
                "reformulations": reforms_path,
                "docs": len(world.docs),
                "queries_count": len(world.queries),
            },
            indent=2,
        )
    )
    return EXIT_OK


def _cmd_dump_weights(args: argparse.Namespace) -> int:
    path = os.path.join(args.run_dir, "weights.tsv")
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            qid, label, weight = line.rstrip("\n").split("\t")
            if args.qid and qid != args.qid:
                continue
            print(f"{qid}\t{label}\t{weight}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetrank",
        description="Budget-aware multi-reformulation retrieval engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and save an inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("tsv", "jsonl"), default="tsv")
    p.add_argument("--out", required=True)
    p.add_argument("--stopwords", default="")
    p.add_argument("--no-stopwords", action="store_true")
    p.add_argument("--no-stemming", action="store_true")
    p.add_argument("--no-lowercase", action="store_true")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("reformulate", help="generate reformulations via HTTP")
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", default="")
    p.add_argument("--api-key-env", default="")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--temperature", type=float, default=0.5)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--retries", type=int, default=2)
    p.set_defaults(func=_cmd_reformulate)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[],
                   metavar="SECTION.KEY=VALUE")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="evaluate TREC run files against qrels")
    p.add_argument("--run", action="append", required=True,
                   metavar="[TAG=]PATH")
    p.add_argument("--qrels", required=True)
    p.add_argument("--cutoffs", default="50,100")
    p.add_argument("--threshold", type=int, default=1)
    p.add_argument("--compare", action="append", default=[],
                   metavar="TAGA:TAGB")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="reformulation-count sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[],
                   metavar="SECTION.KEY=VALUE")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("simulate", help="generate a synthetic topic world")
    p.add_argument("--out", required=True)
    p.add_argument("--topics", type=int, default=4)
    p.add_argument("--docs-per-topic", type=int, default=100)
    p.add_argument("--vocab-per-topic", type=int, default=60)
    p.add_argument("--doc-len-min", type=int, default=15)
    p.add_argument("--doc-len-max", type=int, default=40)
    p.add_argument("--query-len", type=int, default=4)
    p.add_argument("--queries-per-topic", type=int, default=1)
    p.add_argument("--reformulations", type=int, default=5)
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("dump-weights", help="print learned feature weights")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--qid", default="")
    p.set_defaults(func=_cmd_dump_weights)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
