"""Feature templates for the sequence tagger.

Two standard template sets are shipped: variant "a" (the full set) and
variant "b" (no lexicon-membership flag, neighbors limited to +/-1), so
that corpus-scale extraction can vote across two genuinely different
models.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Token, TokenClass, classify_token
from .lexicon import Lexicon, normalize_term

_SHAPE_MAX = 5


def word_shape(text: str) -> str:
    """Character-class signature, truncated to 5 classes plus '+'."""
    classes = []
    for c in text:
        if c.isupper():
            classes.append("X")
        elif c.islower():
            classes.append("x")
        elif c.isdigit():
            classes.append("d")
        else:
            classes.append(c)
    if len(classes) > _SHAPE_MAX:
        return "".join(classes[:_SHAPE_MAX]) + "+"
    return "".join(classes)


@dataclass(frozen=True)
class FeatureConfig:
    variant: str = "a"
    use_lexicon: bool = True
    neighbor_offsets: tuple[int, ...] = (-2, -1, 1, 2)
    affix_lengths: tuple[int, ...] = (2, 3, 4)

    @classmethod
    def for_variant(cls, variant: str) -> "FeatureConfig":
        if variant == "a":
            return cls()
        if variant == "b":
            return cls(variant="b", use_lexicon=False, neighbor_offsets=(-1, 1))
        raise ValueError(f"unknown feature variant {variant!r}")


def lexicon_keys(lex: Lexicon | frozenset[str] | None) -> frozenset[str]:
    if lex is None:
        return frozenset()
    if isinstance(lex, frozenset):
        return lex
    return frozenset(lex.terms) | frozenset(lex.aliases)


def extract_features(
    tokens: list[Token],
    lex: Lexicon | frozenset[str] | None = None,
    config: FeatureConfig | None = None,
) -> list[list[str]]:
    """Per-token feature strings; a pure function of (tokens, lexicon, config)."""
    cfg = config or FeatureConfig()
    keys = lexicon_keys(lex) if cfg.use_lexicon else frozenset()
    lowers = [t.text.lower() for t in tokens]
    out: list[list[str]] = []
    for i, tok in enumerate(tokens):
        text = tok.text
        feats = [
            f"w={text}",
            f"lw={lowers[i]}",
            f"shape={word_shape(text)}",
        ]
        for k in cfg.affix_lengths:
            if len(text) >= k:
                feats.append(f"pre{k}={lowers[i][:k]}")
                feats.append(f"suf{k}={lowers[i][-k:]}")
        kind = classify_token(text)
        if kind is TokenClass.NUMERIC:
            feats.append("isnum")
        elif kind is TokenClass.PUNCT:
            feats.append("ispunct")
        if keys and normalize_term(text) in keys:
            feats.append("inlex")
        for off in cfg.neighbor_offsets:
            j = i + off
            neighbor = lowers[j] if 0 <= j < len(tokens) else ("<s>" if j < 0 else "</s>")
            feats.append(f"w[{off:+d}]={neighbor}")
        out.append(feats)
    return out
