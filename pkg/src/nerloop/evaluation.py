"""Entity-level scoring, K-fold cross-validation, and context analysis.

Scoring follows the boundary-error convention: a prediction matching a
gold span exactly (same token range) is a true positive; every other
prediction is a false positive; a gold span is a false negative only when
no prediction matches it exactly *or* overlaps it.  A gold span clipped or
extended by a prediction therefore contributes only the false positive,
which is why tp + fn can be less than the number of gold entities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .annotations import LabeledParagraph, Span
from .corpus import TokenClass, classify_token


@dataclass
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    # Gold spans that were overlapped-but-missed; surfaced in reports.
    boundary_overlaps: int = 0

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            boundary_overlaps=self.boundary_overlaps + other.boundary_overlaps,
        )

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.tp, self.fp, self.fn)


def _overlaps(a: Span, b: Span) -> bool:
    return a.token_start <= b.token_end and b.token_start <= a.token_end


def score_entities(gold: Sequence[Span], pred: Sequence[Span]) -> EvalCounts:
    """Count TP/FP/FN for one paragraph under the boundary-error rule."""
    gold_keys = {(g.token_start, g.token_end) for g in gold}
    pred_keys = {(p.token_start, p.token_end) for p in pred}
    counts = EvalCounts()
    for p in pred:
        if (p.token_start, p.token_end) in gold_keys:
            counts.tp += 1
        else:
            counts.fp += 1
    for g in gold:
        if (g.token_start, g.token_end) in pred_keys:
            continue
        if any(_overlaps(g, p) for p in pred):
            counts.boundary_overlaps += 1
        else:
            counts.fn += 1
    return counts


def score_dataset(
    pairs: Iterable[tuple[Sequence[Span], Sequence[Span]]],
) -> EvalCounts:
    """Sum score_entities over (gold, pred) span-list pairs."""
    total = EvalCounts()
    for gold, pred in pairs:
        total = total + score_entities(gold, pred)
    return total


def prf1(c: EvalCounts) -> tuple[float, float, float]:
    """Precision, recall, F1; a zero denominator yields 0."""
    p = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    r = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = 2 * p * r / (p + r) if (p + r) else 0.0
    return (p, r, f1)


def evaluate_model(model, data: Sequence[LabeledParagraph]) -> tuple[EvalCounts, float]:
    """Decode each paragraph and score against its gold spans."""
    counts = score_dataset((lp.spans, model.decode_spans(lp.tokens).spans) for lp in data)
    return counts, prf1(counts)[2]


@dataclass(frozen=True)
class FoldSpec:
    k: int
    fold_sizes: tuple[int, ...]
    assignments: tuple[int, ...]

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]


def kfold_split(n: int, k: int) -> FoldSpec:
    """Contiguous folds in dataset order.

    The first (k - n mod k) folds get floor(n/k) items and the rest get
    ceil(n/k), e.g. sizes 19,19,19,19,20 for n=96, k=5.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} items into {k} folds")
    base, rem = divmod(n, k)
    sizes = tuple(base if i < k - rem else base + 1 for i in range(k))
    assignments = []
    for fold, size in enumerate(sizes):
        assignments.extend([fold] * size)
    return FoldSpec(k=k, fold_sizes=sizes, assignments=tuple(assignments))


@dataclass
class FoldMetrics:
    fold: int
    precision: float
    recall: float
    f1: float
    counts: EvalCounts


@dataclass
class KFoldResult:
    folds: list[FoldMetrics]
    mean_f1: float


def kfold_run(
    train_set: Sequence[LabeledParagraph],
    test_set_source: Sequence[LabeledParagraph],
    k: int,
    train_fn: Callable[[list[LabeledParagraph], int], object],
    base_seed: int = 13,
) -> KFoldResult:
    """K-fold cross validation with index-aligned train and test datasets.

    Round i trains on every fold except i of ``train_set`` and tests on
    fold i of ``test_set_source``; fold i of the training dataset is never
    used in round i.  Supports original-vs-corrected comparisons where the
    two datasets hold the same paragraphs with different labels.
    """
    if len(train_set) != len(test_set_source):
        raise ValueError("train and test datasets must be index-aligned")
    spec = kfold_split(len(train_set), k)
    folds = []
    for i in range(k):
        test_idx = spec.fold_indices(i)
        train_idx = [j for j in range(len(train_set)) if spec.assignments[j] != i]
        model = train_fn([train_set[j] for j in train_idx], base_seed + i)
        counts = score_dataset(
            (test_set_source[j].spans, model.decode_spans(test_set_source[j].tokens).spans)
            for j in test_idx
        )
        p, r, f1 = prf1(counts)
        folds.append(FoldMetrics(fold=i, precision=p, recall=r, f1=f1, counts=counts))
    mean_f1 = sum(f.f1 for f in folds) / k
    return KFoldResult(folds=folds, mean_f1=mean_f1)


class ContextScope(Enum):
    AROUND_INCORRECT = "incorrect"
    AROUND_CORRECT = "correct"


@dataclass
class ContextStats:
    window: int
    include_stopwords: bool
    scope: ContextScope
    counts: Counter = field(default_factory=Counter)

    def top(self, n: int = 10) -> list[tuple[str, int]]:
        """Most frequent tokens: count descending, then token ascending."""
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def context_frequencies(
    data: Iterable[tuple[LabeledParagraph, Sequence[Span]]],
    window: int,
    include_stopwords: bool,
    scope: ContextScope,
) -> ContextStats:
    """Frequencies of tokens near correctly / incorrectly predicted entities.

    A predicted span is *correct* when it exactly matches a gold span of
    its paragraph and *incorrect* otherwise.  Context tokens lie within
    ``window`` positions of the entity's nearest token, excluding the
    entity's own tokens and (unless included) stopwords and punctuation.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    stats = ContextStats(window=window, include_stopwords=include_stopwords, scope=scope)
    for lp, predicted in data:
        gold_keys = {(g.token_start, g.token_end) for g in lp.spans}
        for span in predicted:
            exact = (span.token_start, span.token_end) in gold_keys
            if exact != (scope is ContextScope.AROUND_CORRECT):
                continue
            lo = max(0, span.token_start - window)
            hi = min(len(lp.tokens) - 1, span.token_end + window)
            for i in range(lo, hi + 1):
                if span.token_start <= i <= span.token_end:
                    continue
                tok = lp.tokens[i]
                if not include_stopwords and classify_token(tok.text) in (
                    TokenClass.STOPWORD,
                    TokenClass.PUNCT,
                ):
                    continue
                stats.counts[tok.text] += 1
    return stats
