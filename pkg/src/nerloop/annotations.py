"""Entity spans, the IOB codec, and the two dataset formats.

The line-delimited JSON format stores one paragraph per line with fields
``text``, ``tokens`` (text/start/end/id), and ``spans``
(start/end/token_start/token_end/label).  Character indices are Unicode
scalar-value indices.  An optional ``meta`` object (doc_id, para_index,
provenance) extends the record so that read∘write is an identity on full
:class:`LabeledParagraph` values; readers accept records without it.

The CSV export is sentence-segmented, two columns per line (header
``tokens,labels``): space-joined tokens and space-joined IOB labels.
Fields containing commas or quotes are escaped per standard CSV rules.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

from .corpus import Paragraph, Token, tokenize


class DatasetError(Exception):
    """Raised for malformed dataset records or invariant violations."""


class SpanAlignmentError(DatasetError):
    """A span does not line up with token boundaries."""


class Provenance(Enum):
    SILVER_LEXICON = "silver_lexicon"
    SILVER_MODEL = "silver_model"
    GOLD = "gold"


@dataclass(frozen=True, order=True)
class Span:
    """A labeled entity: character range plus the token range it covers."""

    start: int
    end: int
    token_start: int
    token_end: int
    label: str = "drug"


VALID_LABELS = ("O", "B", "I")


@dataclass
class LabeledParagraph:
    paragraph: Paragraph
    tokens: list[Token]
    spans: list[Span]
    provenance: Provenance

    @property
    def text(self) -> str:
        return self.paragraph.text

    def key(self) -> tuple[str, int]:
        return (self.paragraph.doc_id, self.paragraph.para_index)


def make_labeled(
    paragraph: Paragraph,
    spans: Iterable[Span],
    provenance: Provenance,
    tokens: list[Token] | None = None,
) -> LabeledParagraph:
    """Construct a validated LabeledParagraph, tokenizing if needed."""
    tokens = tokens if tokens is not None else tokenize(paragraph.text)
    spans = sorted(spans)
    lp = LabeledParagraph(paragraph=paragraph, tokens=tokens, spans=spans, provenance=provenance)
    validate_spans(lp.tokens, lp.spans, text_len=len(paragraph.text))
    return lp


def validate_spans(tokens: list[Token], spans: list[Span], text_len: int | None = None) -> None:
    """Check span invariants against a tokenization; raise on violation."""
    prev_end = -1
    for s in spans:
        if not (0 <= s.token_start <= s.token_end < len(tokens)):
            raise SpanAlignmentError(f"span {s} token range outside tokenization")
        if s.start >= s.end:
            raise SpanAlignmentError(f"span {s} has empty character range")
        if text_len is not None and s.end > text_len:
            raise SpanAlignmentError(f"span {s} extends past text of length {text_len}")
        if s.start != tokens[s.token_start].start or s.end != tokens[s.token_end].end:
            raise SpanAlignmentError(f"span {s} not aligned to token boundaries")
        if s.token_start <= prev_end:
            raise SpanAlignmentError(f"span {s} overlaps the previous span")
        prev_end = s.token_end


def spans_to_iob(lp: LabeledParagraph) -> list[str]:
    """Encode spans as an IOB label sequence over lp.tokens."""
    labels = ["O"] * len(lp.tokens)
    for s in lp.spans:
        if s.token_end >= len(lp.tokens):
            raise SpanAlignmentError(f"span {s} outside tokenization")
        labels[s.token_start] = "B"
        for i in range(s.token_start + 1, s.token_end + 1):
            labels[i] = "I"
    return labels


def is_valid_iob(labels: list[str]) -> bool:
    prev = "O"
    for lab in labels:
        if lab not in VALID_LABELS:
            return False
        if lab == "I" and prev == "O":
            return False
        prev = lab
    return True


def repair_iob(labels: list[str]) -> tuple[list[str], int]:
    """Promote stray I labels (at position 0 or after O) to B.

    Conservative repair: the token stays inside an entity.  Returns the
    repaired sequence and the number of promotions.
    """
    repaired = list(labels)
    repairs = 0
    prev = "O"
    for i, lab in enumerate(repaired):
        if lab == "I" and prev == "O":
            repaired[i] = "B"
            repairs += 1
        prev = repaired[i]
    return repaired, repairs


class IobDecodeResult(NamedTuple):
    spans: list[Span]
    repairs: int


def iob_to_spans(tokens: list[Token], labels: list[str], label: str = "drug") -> IobDecodeResult:
    """Decode an IOB sequence into spans, repairing invalid sequences first."""
    if len(tokens) != len(labels):
        raise DatasetError(f"{len(labels)} labels for {len(tokens)} tokens")
    for lab in labels:
        if lab not in VALID_LABELS:
            raise DatasetError(f"unknown IOB label {lab!r}")
    fixed, repairs = repair_iob(labels)
    spans: list[Span] = []
    start: int | None = None
    for i, lab in enumerate(fixed):
        if lab == "B":
            if start is not None:
                spans.append(_token_span(tokens, start, i - 1, label))
            start = i
        elif lab == "O":
            if start is not None:
                spans.append(_token_span(tokens, start, i - 1, label))
                start = None
    if start is not None:
        spans.append(_token_span(tokens, start, len(fixed) - 1, label))
    return IobDecodeResult(spans=spans, repairs=repairs)


def _token_span(tokens: list[Token], token_start: int, token_end: int, label: str) -> Span:
    return Span(
        start=tokens[token_start].start,
        end=tokens[token_end].end,
        token_start=token_start,
        token_end=token_end,
        label=label,
    )


_TOKEN_KEYS = {"text", "start", "end", "id"}
_SPAN_KEYS = {"start", "end", "token_start", "token_end", "label"}
_RECORD_KEYS = {"text", "tokens", "spans"}
_META_KEYS = {"doc_id", "para_index", "provenance"}


def record_from_labeled(lp: LabeledParagraph, include_meta: bool = True) -> dict:
    """Serialize to the dataset record structure (fixed key order)."""
    rec = {
        "text": lp.text,
        "tokens": [
            {"text": t.text, "start": t.start, "end": t.end, "id": t.id} for t in lp.tokens
        ],
        "spans": [
            {
                "start": s.start,
                "end": s.end,
                "token_start": s.token_start,
                "token_end": s.token_end,
                "label": s.label,
            }
            for s in lp.spans
        ],
    }
    if include_meta:
        rec["meta"] = {
            "doc_id": lp.paragraph.doc_id,
            "para_index": lp.paragraph.para_index,
            "provenance": lp.provenance.value,
        }
    return rec


def labeled_from_record(rec: dict, default_doc_id: str = "", default_para_index: int = 0) -> LabeledParagraph:
    """Parse and validate one dataset record."""
    if not isinstance(rec, dict):
        raise DatasetError("record is not an object")
    keys = set(rec)
    unknown = keys - _RECORD_KEYS - {"meta"}
    missing = _RECORD_KEYS - keys
    if unknown or missing:
        raise DatasetError(f"record fields mismatch (missing={sorted(missing)}, unknown={sorted(unknown)})")
    text = rec["text"]
    if not isinstance(text, str):
        raise DatasetError("text must be a string")

    tokens = []
    for i, t in enumerate(rec["tokens"]):
        if not isinstance(t, dict) or set(t) != _TOKEN_KEYS:
            raise DatasetError(f"token {i} fields must be exactly {sorted(_TOKEN_KEYS)}")
        tok = Token(text=t["text"], start=t["start"], end=t["end"], id=t["id"])
        if tok.id != i or not (0 <= tok.start < tok.end <= len(text)):
            raise DatasetError(f"token {i} has inconsistent offsets or id")
        if text[tok.start : tok.end] != tok.text:
            raise DatasetError(f"token {i} text does not match its offsets")
        if tokens and tok.start < tokens[-1].end:
            raise DatasetError(f"token {i} overlaps the previous token")
        tokens.append(tok)

    spans = []
    for i, s in enumerate(rec["spans"]):
        if not isinstance(s, dict) or set(s) != _SPAN_KEYS:
            raise DatasetError(f"span {i} fields must be exactly {sorted(_SPAN_KEYS)}")
        spans.append(
            Span(
                start=s["start"],
                end=s["end"],
                token_start=s["token_start"],
                token_end=s["token_end"],
                label=s["label"],
            )
        )

    meta = rec.get("meta", {})
    if meta and set(meta) - _META_KEYS:
        raise DatasetError(f"meta fields must be within {sorted(_META_KEYS)}")
    provenance = Provenance(meta["provenance"]) if "provenance" in meta else Provenance.GOLD
    paragraph = Paragraph(
        doc_id=meta.get("doc_id", default_doc_id),
        para_index=meta.get("para_index", default_para_index),
        text=text,
    )
    lp = LabeledParagraph(paragraph=paragraph, tokens=tokens, spans=sorted(spans), provenance=provenance)
    validate_spans(lp.tokens, lp.spans, text_len=len(text))
    return lp


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def write_dataset(lps: Iterable[LabeledParagraph], path: str | Path, include_meta: bool = True) -> None:
    """Write paragraphs as line-delimited JSON, one record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for lp in lps:
            f.write(dumps_record(record_from_labeled(lp, include_meta=include_meta)))
            f.write("\n")


def read_dataset(path: str | Path) -> list[LabeledParagraph]:
    """Read a line-delimited dataset, rejecting malformed records by line."""
    path = Path(path)
    out: list[LabeledParagraph] = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(labeled_from_record(rec, default_para_index=lineno - 1))
            except (json.JSONDecodeError, DatasetError) as e:
                raise DatasetError(f"{path}:{lineno}: {e}") from e
    return out


_SENTENCE_END = {".", "!", "?"}


def sentence_token_ranges(lp: LabeledParagraph) -> list[tuple[int, int]]:
    """Split tokens into sentence ranges [start, end) for CSV export.

    A boundary falls after a {. ! ?} token that is followed by whitespace
    and an uppercase letter, and never inside a span.
    """
    tokens, text = lp.tokens, lp.text
    if not tokens:
        return []
    boundaries = []
    for i in range(len(tokens) - 1):
        tok, nxt = tokens[i], tokens[i + 1]
        if tok.text not in _SENTENCE_END:
            continue
        if nxt.start <= tok.end:  # no whitespace between
            continue
        if not text[nxt.start].isupper():
            continue
        if any(s.token_start <= i and i + 1 <= s.token_end for s in lp.spans):
            continue
        boundaries.append(i + 1)
    ranges = []
    prev = 0
    for b in boundaries:
        ranges.append((prev, b))
        prev = b
    ranges.append((prev, len(tokens)))
    return ranges


def export_iob_csv(lps: Iterable[LabeledParagraph], path: str | Path) -> None:
    """Write the sentence-segmented two-column IOB CSV."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tokens", "labels"])
        for lp in lps:
            labels = spans_to_iob(lp)
            for start, end in sentence_token_ranges(lp):
                toks = " ".join(t.text for t in lp.tokens[start:end])
                labs = " ".join(labels[start:end])
                writer.writerow([toks, labs])


def with_spans(lp: LabeledParagraph, spans: Iterable[Span], provenance: Provenance) -> LabeledParagraph:
    """Copy of lp with replacement spans (validated) and new provenance."""
    new = replace(lp, spans=sorted(spans), provenance=provenance)
    validate_spans(new.tokens, new.spans, text_len=len(new.text))
    return new
