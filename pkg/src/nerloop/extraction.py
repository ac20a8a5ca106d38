"""Corpus-scale extraction with two models and cross-model voting.

Both taggers decode every paragraph; each detected entity surface is
normalized (casefold, surrounding punctuation trimmed) and tallied per
model.  Entities detected by both models at counts within an inclusive
factor of 10 are "balanced" - the cross-model agreement signal used to
rank likely true positives.  Extraction shards the corpus by contiguous
paragraph ranges across a worker pool; results are independent of the
worker count.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Paragraph, tokenize
from .lexicon import Lexicon, normalize_term

_EDGE_PUNCT_RE = re.compile(r"^[\W_]+|[\W_]+$")


def normalize_surface(text: str) -> str:
    """Casefold and trim surrounding punctuation; internal text untouched."""
    collapsed = " ".join(text.split())
    trimmed = _EDGE_PUNCT_RE.sub("", collapsed)
    return (trimmed or collapsed).casefold()


class Balance(Enum):
    BALANCED = "balanced"
    IMBALANCED = "imbalanced"


@dataclass
class EntityTally:
    surface: str
    count_a: int = 0
    count_b: int = 0
    documents: set[str] = field(default_factory=set)

    @property
    def total(self) -> int:
        return self.count_a + self.count_b


def classify_balanced(tally: EntityTally) -> Balance:
    """Balanced iff both models detect it and counts are within 10x (inclusive)."""
    a, b = tally.count_a, tally.count_b
    if a < 1 or b < 1:
        return Balance.IMBALANCED
    if max(a, b) <= 10 * min(a, b):
        return Balance.BALANCED
    return Balance.IMBALANCED


@dataclass
class ExtractionReport:
    tallies: list[EntityTally]

    @property
    def ranking(self) -> list[EntityTally]:
        return self.tallies

    @property
    def balanced(self) -> list[EntityTally]:
        return [t for t in self.tallies if classify_balanced(t) is Balance.BALANCED]

    def pool(self, name: str) -> list[EntityTally]:
        if name.upper() == "ALL":
            return self.tallies
        if name.upper() == "BALANCED":
            return self.balanced
        raise ValueError(f"unknown pool {name!r}")


class _ShardTally:
    __slots__ = ("counts_a", "counts_b", "documents")

    def __init__(self) -> None:
        self.counts_a: Counter = Counter()
        self.counts_b: Counter = Counter()
        self.documents: dict[str, set[str]] = {}


def _process_shard(shard: Sequence[Paragraph], model_a, model_b) -> _ShardTally:
    tally = _ShardTally()
    for p in shard:
        tokens = tokenize(p.text)
        if not tokens:
            continue
        for model, counts in ((model_a, tally.counts_a), (model_b, tally.counts_b)):
            for span in model.decode_spans(tokens).spans:
                surface = normalize_surface(p.text[span.start : span.end])
                if not surface:
                    continue
                counts[surface] += 1
                tally.documents.setdefault(surface, set()).add(p.doc_id)
    return tally


def extract_corpus(
    paragraphs: Sequence[Paragraph], model_a, model_b, workers: int = 1
) -> ExtractionReport:
    """Decode every paragraph with both models and tally detections.

    The corpus is split into ``workers`` contiguous shards; per-shard
    tallies are merged in shard order, so the report is identical for any
    worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    paragraphs = list(paragraphs)
    if workers == 1 or len(paragraphs) < 2 * workers:
        shard_tallies = [_process_shard(paragraphs, model_a, model_b)]
    else:
        bounds = [round(i * len(paragraphs) / workers) for i in range(workers + 1)]
        shards = [paragraphs[bounds[i] : bounds[i + 1]] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            shard_tallies = list(
                pool.map(lambda s: _process_shard(s, model_a, model_b), shards)
            )
    return ExtractionReport(tallies=merge_tallies(shard_tallies))


def merge_tallies(shard_tallies: Iterable[_ShardTally]) -> list[EntityTally]:
    """Pure fold of shard tallies into the ranked entity list."""
    counts_a: Counter = Counter()
    counts_b: Counter = Counter()
    documents: dict[str, set[str]] = {}
    for shard in shard_tallies:
        counts_a.update(shard.counts_a)
        counts_b.update(shard.counts_b)
        for surface, docs in shard.documents.items():
            documents.setdefault(surface, set()).update(docs)
    tallies = [
        EntityTally(
            surface=surface,
            count_a=counts_a.get(surface, 0),
            count_b=counts_b.get(surface, 0),
            documents=documents.get(surface, set()),
        )
        for surface in set(counts_a) | set(counts_b)
    ]
    # Descending by total detections; lexicographic tie-break keeps the
    # ranking a total order.
    tallies.sort(key=lambda t: (-t.total, t.surface))
    return tallies


def write_report_csv(report: ExtractionReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["surface", "count_a", "count_b", "balanced", "rank"])
        for rank, t in enumerate(report.tallies, start=1):
            writer.writerow(
                [t.surface, t.count_a, t.count_b, classify_balanced(t).value, rank]
            )


def read_report_csv(path: str | Path) -> ExtractionReport:
    tallies = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            tallies.append(
                EntityTally(
                    surface=row["surface"],
                    count_a=int(row["count_a"]),
                    count_b=int(row["count_b"]),
                )
            )
    return ExtractionReport(tallies=tallies)


def report_csv_bytes(report: ExtractionReport) -> bytes:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["surface", "count_a", "count_b", "balanced", "rank"])
    for rank, t in enumerate(report.tallies, start=1):
        writer.writerow([t.surface, t.count_a, t.count_b, classify_balanced(t).value, rank])
    return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class MatchRates:
    pool: str
    top_k: int
    exact: float
    exact_plus_partial: float


def _reference_word_index(ref: Lexicon) -> tuple[set[str], set[str]]:
    """(exact keys, words of multi-word names/aliases) for partial matching."""
    exact = set(ref.terms) | set(ref.aliases)
    partial_words = set()
    for key in exact:
        words = key.split(" ")
        if len(words) > 1:
            partial_words.update(words)
    return exact, partial_words


def compare_reference(
    report: ExtractionReport, ref: Lexicon, top_k: int, pool: str = "ALL"
) -> MatchRates:
    """Exact and exact-plus-partial match rates of the top-k ranked entities.

    Exact: the normalized surface equals a reference name or alias.
    Partial: the surface equals one whole word of a multi-word reference
    name or alias.
    """
    entities = report.pool(pool)
    if top_k > len(entities):
        raise ValueError(f"top_k={top_k} exceeds pool size {len(entities)}")
    exact_keys, partial_words = _reference_word_index(ref)
    n_exact = n_partial = 0
    for tally in entities[:top_k]:
        key = normalize_term(tally.surface)
        if key in exact_keys:
            n_exact += 1
        elif key in partial_words:
            n_partial += 1
    return MatchRates(
        pool=pool.upper(),
        top_k=top_k,
        exact=n_exact / top_k if top_k else 0.0,
        exact_plus_partial=(n_exact + n_partial) / top_k if top_k else 0.0,
    )
