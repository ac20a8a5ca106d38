"""Corpus ingestion, deterministic paragraph streaming, and tokenization.

The corpus file is line-delimited JSON, one document per line with fields
``doc_id`` (string) and ``paragraphs`` (array of strings).  A loaded corpus
is exposed as a :class:`CorpusStream` that emits paragraphs in a fixed
permuted order under a 64-bit seed; a given (corpus bytes, seed) pair always
yields the same order, and no paragraph is emitted twice over the life of
the stream.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterator

_MASK64 = (1 << 64) - 1


class CorpusError(Exception):
    """Raised for unreadable, malformed, or empty corpus files."""


@dataclass(frozen=True)
class Paragraph:
    doc_id: str
    para_index: int
    text: str


@dataclass(frozen=True)
class Token:
    """A token with character offsets into its paragraph text."""

    text: str
    start: int
    end: int
    id: int


class TokenClass(Enum):
    WORD = "word"
    STOPWORD = "stopword"
    PUNCT = "punct"
    NUMERIC = "numeric"


# Word tokens are maximal runs of letters/digits/underscore; an internal
# hyphen, slash, or apostrophe joins alphanumeric neighbors into one token
# ("once/day", "co-administered").  Any other non-space character stands
# alone as a single-character token.
_TOKEN_RE = re.compile(r"\w+(?:[-/']\w+)*|[^\w\s]")

_NUM_RE = re.compile(r"\d")


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into offset-preserving tokens.

    Joining the token spans plus the skipped inter-token characters
    reconstructs ``text`` exactly; only whitespace falls between tokens.
    """
    return [
        Token(text=m.group(), start=m.start(), end=m.end(), id=i)
        for i, m in enumerate(_TOKEN_RE.finditer(text))
    ]


def _load_stopwords() -> frozenset[str]:
    data = resources.files("nerloop.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in data.splitlines() if line.strip())


STOPWORDS: frozenset[str] = _load_stopwords()


def classify_token(token_text: str) -> TokenClass:
    """Classify a token as PUNCT, NUMERIC, STOPWORD, or WORD.

    PUNCT: every character is punctuation (no alphanumerics or underscore).
    NUMERIC: parses as a number, including decimal and percent forms
    ("2.5", "2.5%"); mixed tokens like "300mg" are WORD.
    STOPWORD: lowercased text is in the embedded stopword list.
    """
    if not token_text:
        raise ValueError("classify_token requires a non-empty token")
    if all(not c.isalnum() and c != "_" for c in token_text):
        return TokenClass.PUNCT
    if _NUM_RE.search(token_text):
        candidate = token_text[:-1] if token_text.endswith("%") else token_text
        try:
            float(candidate)
            return TokenClass.NUMERIC
        except ValueError:
            pass
    if token_text.lower() in STOPWORDS:
        return TokenClass.STOPWORD
    return TokenClass.WORD


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 generator: returns (output, next state).

    Fixed algorithm so permutations are reproducible across implementations.
    """
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of range(n) driven by splitmix64.

    Index j for position i is drawn as ``splitmix64 output mod (i + 1)``;
    the modulo bias is negligible for corpus-scale n and keeps the
    algorithm trivially portable.
    """
    order = list(range(n))
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        z, state = splitmix64(state)
        j = z % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


@dataclass
class CorpusStream:
    """Single-consumer stream over a corpus in seeded permuted order."""

    paragraphs: list[Paragraph]
    permutation_seed: int
    cursor: int = 0
    consumed_ids: set[tuple[str, int]] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.paragraphs)

    @property
    def remaining(self) -> int:
        return len(self.paragraphs) - self.cursor

    def next_paragraph(self) -> Paragraph | None:
        """Return the next unconsumed paragraph, or None when exhausted."""
        if self.cursor >= len(self.paragraphs):
            return None
        p = self.paragraphs[self.cursor]
        key = (p.doc_id, p.para_index)
        assert key not in self.consumed_ids, f"paragraph emitted twice: {key}"
        self.consumed_ids.add(key)
        self.cursor += 1
        return p

    def advance_to(self, cursor: int) -> None:
        """Fast-forward to a persisted cursor position (for resume)."""
        if cursor < self.cursor or cursor > len(self.paragraphs):
            raise ValueError(f"cannot advance from {self.cursor} to {cursor}")
        while self.cursor < cursor:
            self.next_paragraph()

    def __iter__(self) -> Iterator[Paragraph]:
        while (p := self.next_paragraph()) is not None:
            yield p


def read_documents(path: str | Path) -> list[tuple[str, list[str]]]:
    """Read the line-delimited document file, validating per-line structure."""
    path = Path(path)
    try:
        raw = path.read_text("utf-8")
    except OSError as e:
        raise CorpusError(f"cannot read corpus file {path}: {e}") from e
    docs: list[tuple[str, list[str]]] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {e}") from e
        if not isinstance(record, dict) or "doc_id" not in record or "paragraphs" not in record:
            raise CorpusError(f"{path}:{lineno}: record must have doc_id and paragraphs")
        doc_id = record["doc_id"]
        paras = record["paragraphs"]
        if not isinstance(doc_id, str) or not isinstance(paras, list) or not all(
            isinstance(p, str) for p in paras
        ):
            raise CorpusError(f"{path}:{lineno}: doc_id must be a string and paragraphs a list of strings")
        if doc_id in seen_ids:
            raise CorpusError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
        seen_ids.add(doc_id)
        docs.append((doc_id, paras))
    return docs


def corpus_from_documents(
    docs: list[tuple[str, list[str]]], seed: int
) -> CorpusStream:
    """Build a permuted stream over all non-blank paragraphs of ``docs``."""
    paragraphs = [
        Paragraph(doc_id=doc_id, para_index=i, text=text)
        for doc_id, paras in docs
        for i, text in enumerate(paras)
        if text.strip()
    ]
    if not paragraphs:
        raise CorpusError("corpus contains no non-blank paragraphs")
    order = seeded_permutation(len(paragraphs), seed)
    return CorpusStream(
        paragraphs=[paragraphs[i] for i in order], permutation_seed=seed
    )


def load_corpus(path: str | Path, seed: int = 42) -> CorpusStream:
    """Load a corpus file into a seeded paragraph stream."""
    return corpus_from_documents(read_documents(path), seed)
