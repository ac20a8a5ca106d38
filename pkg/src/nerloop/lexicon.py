"""Gazetteer support: term-list loading and dictionary auto-labeling.

The term file is CSV with columns ``name``, ``aliases`` (semicolon
separated), and ``code`` (optional).  Matching against paragraphs is
whole-token, case-insensitive, longest-match-wins with left-to-right
tie-breaking, so matched spans never overlap.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple

from .annotations import LabeledParagraph, Provenance, Span, make_labeled
from .corpus import Paragraph, Token, tokenize

logger = logging.getLogger(__name__)

_WS_RE = re.compile(r"\s+")


def normalize_term(term: str) -> str:
    """Casefold and collapse internal whitespace; applied exactly once."""
    return _WS_RE.sub(" ", term.strip()).casefold()


class LexiconError(Exception):
    """Raised for unreadable or structurally invalid term files."""


@dataclass
class Lexicon:
    """An immutable-after-load set of normalized terms and aliases."""

    terms: set[str] = field(default_factory=set)
    aliases: dict[str, str] = field(default_factory=dict)
    metadata: dict[str, str | None] = field(default_factory=dict)
    skipped_rows: int = 0

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, surface: str) -> bool:
        key = normalize_term(surface)
        return key in self.terms or key in self.aliases

    @property
    def max_term_tokens(self) -> int:
        longest = 1
        for key in self._all_keys():
            longest = max(longest, key.count(" ") + 1)
        return longest

    def _all_keys(self) -> Iterable[str]:
        yield from self.terms
        yield from self.aliases

    def add(self, name: str, aliases: Iterable[str] = (), code: str | None = None) -> None:
        key = normalize_term(name)
        if not key:
            raise LexiconError("empty term name")
        self.terms.add(key)
        self.metadata.setdefault(key, code)
        for alias in aliases:
            akey = normalize_term(alias)
            if akey and akey not in self.terms:
                self.aliases.setdefault(akey, key)


def has_code(code: str | None) -> bool:
    """The default row filter: keep rows carrying a classification code."""
    return bool(code and code.strip())


def load_lexicon(
    path: str | Path,
    filter: Callable[[str | None], bool] | None = None,
) -> Lexicon:
    """Load a term file, keeping rows whose code passes ``filter``.

    Malformed rows are skipped with a logged warning and counted in
    ``Lexicon.skipped_rows``.
    """
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as e:
        raise LexiconError(f"cannot read term file {path}: {e}") from e
    lex = Lexicon()
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "name" not in reader.fieldnames:
            raise LexiconError(f"{path}: term file must have a 'name' column")
        for rowno, row in enumerate(reader, start=2):
            name = (row.get("name") or "").strip()
            if not name:
                logger.warning("%s:%d: skipping row without a name", path, rowno)
                lex.skipped_rows += 1
                continue
            code = row.get("code") or None
            if filter is not None and not filter(code):
                continue
            aliases = [a for a in (row.get("aliases") or "").split(";") if a.strip()]
            lex.add(name, aliases, code)
    return lex


class LexiconMatch(NamedTuple):
    span: Span
    matched_key: str
    is_alias: bool


def find_matches(tokens: list[Token], lex: Lexicon) -> list[LexiconMatch]:
    """Longest-match, left-to-right lexicon matching over whole tokens."""
    matches: list[LexiconMatch] = []
    max_len = lex.max_term_tokens
    i = 0
    n = len(tokens)
    while i < n:
        hit = None
        for length in range(min(max_len, n - i), 0, -1):
            key = normalize_term(" ".join(t.text for t in tokens[i : i + length]))
            if key in lex.terms:
                hit = (length, key, False)
                break
            if key in lex.aliases:
                hit = (length, key, True)
                break
        if hit is None:
            i += 1
            continue
        length, key, is_alias = hit
        span = Span(
            start=tokens[i].start,
            end=tokens[i + length - 1].end,
            token_start=i,
            token_end=i + length - 1,
        )
        matches.append(LexiconMatch(span=span, matched_key=key, is_alias=is_alias))
        i += length
    return matches


def auto_label(p: Paragraph, lex: Lexicon) -> LabeledParagraph:
    """Label every maximal lexicon match in ``p`` as a silver span."""
    tokens = tokenize(p.text)
    spans = [m.span for m in find_matches(tokens, lex)]
    return make_labeled(p, spans, Provenance.SILVER_LEXICON, tokens=tokens)
