"""Reformulation generators: canned files, HTTP chat completion, synthetic.

All generators return a ReformulationSet whose entries are normalized
(lowercased, whitespace-collapsed), deduplicated, and never include the
normalized original query.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
import zlib
from dataclasses import dataclass

import numpy as np
import requests

from .errors import FormatError, GenerationError, TransportError
from .simulate import TopicWorld

_LIST_MARKER_RE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")
_WS_RE = re.compile(r"\s+")


def normalize_query(text: str) -> str:
    return _WS_RE.sub(" ", text.strip().lower())


@dataclass(frozen=True)
class ReformulationSet:
    query_id: str
    original: str
    reformulations: tuple[str, ...]
    generator_tag: str = ""
    missing: bool = False  # set when a canned file had no entry for the query

    @property
    def m(self) -> int:
        return len(self.reformulations)

    def truncated(self, m: int) -> "ReformulationSet":
        """First-m prefix, for reformulation-count sweeps."""
        return ReformulationSet(
            self.query_id, self.original, self.reformulations[:m],
            self.generator_tag, self.missing,
        )


def make_reformulation_set(
    query_id: str,
    original: str,
    candidates: list[str],
    generator_tag: str = "",
    missing: bool = False,
) -> ReformulationSet:
    """Normalize, drop empties and the original, deduplicate (order kept)."""
    norm_original = normalize_query(original)
    seen: set[str] = set()
    kept: list[str] = []
    for cand in candidates:
        norm = normalize_query(cand)
        if not norm or norm == norm_original or norm in seen:
            continue
        seen.add(norm)
        kept.append(norm)
    return ReformulationSet(query_id, original, tuple(kept), generator_tag, missing)


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str = "file"  # "file" | "http" | "synthetic"
    n_requested: int = 5
    temperature: float = 0.5
    max_tokens: int = 256
    prompt_template: str = (
        "Generate {n} alternative phrasings of the following search query, "
        "one per line, without numbering.\nQuery: {query}"
    )
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    retries: int = 2
    backoff_seconds: float = 0.5
    timeout_seconds: float = 30.0

    def __post_init__(self) -> None:
        if self.n_requested < 1:
            raise ValueError("n_requested must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


# ---------------------------------------------------------------------------
# File mode: line-delimited {"qid": ..., "reformulations": [...]} records.
# ---------------------------------------------------------------------------


def load_reformulation_file(path: str) -> dict[str, list[str]]:
    records: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON") from exc
            if "qid" not in rec or "reformulations" not in rec:
                raise FormatError(
                    f"{path}:{lineno}: missing 'qid' or 'reformulations'"
                )
            if not isinstance(rec["reformulations"], list):
                raise FormatError(f"{path}:{lineno}: 'reformulations' not a list")
            records[str(rec["qid"])] = [str(r) for r in rec["reformulations"]]
    return records


def reformulate_file(path: str, query_id: str, original: str = "") -> ReformulationSet:
    records = load_reformulation_file(path)
    if query_id not in records:
        return make_reformulation_set(
            query_id, original, [], generator_tag="file", missing=True
        )
    return make_reformulation_set(
        query_id, original, records[query_id], generator_tag="file"
    )


def save_reformulation_file(path: str, sets: list[ReformulationSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rs in sets:
            fh.write(
                json.dumps(
                    {"qid": rs.query_id, "reformulations": list(rs.reformulations)}
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# HTTP mode: chat-completion-compatible endpoint.
# ---------------------------------------------------------------------------


def _parse_completion_lines(body: dict) -> list[str]:
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise GenerationError(
            "response missing choices[0].message.content"
        ) from exc
    lines = [_LIST_MARKER_RE.sub("", ln).strip() for ln in str(content).splitlines()]
    return [ln for ln in lines if ln]


def reformulate_http(
    config: GeneratorConfig, query: str, query_id: str = ""
) -> ReformulationSet:
    """One chat-completion request, retried with exponential backoff.

    Failures raise typed errors so callers can fail the query, not the run.
    """
    if config.mode != "http":
        raise ValueError("reformulate_http requires an http-mode config")
    prompt = config.prompt_template.format(query=query, n=config.n_requested)
    payload = {
        "model": config.model,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "messages": [{"role": "user", "content": prompt}],
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key_env:
        key = os.environ.get(config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"

    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        if attempt:
            time.sleep(config.backoff_seconds * 2 ** (attempt - 1))
        try:
            resp = requests.post(
                config.endpoint, json=payload, headers=headers,
                timeout=config.timeout_seconds,
            )
        except requests.RequestException as exc:
            last_error = TransportError(f"reformulator request failed: {exc}")
            continue
        if resp.status_code != 200:
            last_error = TransportError(
                f"reformulator returned status {resp.status_code}"
            )
            continue
        try:
            body = resp.json()
        except ValueError as exc:
            raise GenerationError("reformulator response is not JSON") from exc
        lines = _parse_completion_lines(body)[: config.n_requested]
        return make_reformulation_set(query_id, query, lines, generator_tag="http")
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------------------
# Synthetic mode: controlled topic drift over a simulated world.
# ---------------------------------------------------------------------------


def reformulate_synthetic(
    world: TopicWorld,
    query_topic: int,
    n: int,
    drift_fraction: float,
    seed: int,
    query_id: str = "",
    original: str = "",
    terms_per_reformulation: int = 3,
) -> ReformulationSet:
    """n reformulations, a ceil((1-drift)*n) share on-topic, the rest drawn
    from other topics chosen deterministically from the seed.

    On-topic and drifted entries are interleaved so every prefix of the set
    carries roughly the same drift share; prefix truncation (as done by
    reformulation-count sweeps) then preserves the drift fraction.
    """
    if not 0.0 <= drift_fraction <= 1.0:
        raise ValueError("drift_fraction must be in [0, 1]")
    n_topics = len(world.vocabularies)
    if drift_fraction > 0 and n_topics < 2:
        raise ValueError("drift requires at least 2 topics")
    rng = np.random.default_rng(seed)
    keep = 1.0 - drift_fraction
    # Position i (1-based) is on-topic iff the running on-topic quota grows.
    on_topic_flags = [
        math.ceil(keep * (i + 1)) > math.ceil(keep * i) for i in range(n)
    ]
    other_topics = [t for t in range(n_topics) if t != query_topic]
    candidates: list[str] = []
    for i in range(n):
        if on_topic_flags[i]:
            topic = query_topic
        else:
            topic = other_topics[int(rng.integers(len(other_topics)))]
        vocab = world.vocabularies[topic]
        size = min(terms_per_reformulation, len(vocab))
        terms = rng.choice(np.array(vocab), size=size, replace=False)
        candidates.append(" ".join(terms))
    return make_reformulation_set(
        query_id, original, candidates, generator_tag="synthetic"
    )


@dataclass
class SyntheticReformulator:
    """On-demand reformulator for a simulated world (one seed per query)."""

    world: TopicWorld
    drift_fraction: float
    n: int
    seed: int = 0
    terms_per_reformulation: int = 3

    def generate(self, query_id: str, original: str, topic: int) -> ReformulationSet:
        # Per-query seed derived from (base seed, qid); zlib.crc32 is stable
        # across processes, unlike builtin str hashing.
        qid_hash = zlib.crc32(query_id.encode("utf-8"))
        sub_seed = int(
            np.random.SeedSequence([self.seed, qid_hash]).generate_state(1)[0]
        )
        return reformulate_synthetic(
            self.world, topic, self.n, self.drift_fraction, sub_seed,
            query_id=query_id, original=original,
            terms_per_reformulation=self.terms_per_reformulation,
        )
