"""Three-phase model-in-the-loop annotation workflow.

Phase A (bootstrap) auto-labels gazetteer-matching paragraphs and has them
verified.  Phase B grows the verified pool with uncertainty-selected
paragraphs until it can carve off a fixed test set.  Phase C keeps
training on the growing gold set, scoring on the frozen test set, and
harvesting more uncertain paragraphs until F1 stops improving.

All randomness is derived from seeds plus stable identifiers (round tags,
paragraph keys), never from shared RNG call order, so a run killed at any
checkpoint and resumed reproduces the uninterrupted run exactly.  State is
checkpointed after every annotator round; verified human work is never
re-requested on resume.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple, Protocol, Sequence

from .annotations import (
    LabeledParagraph,
    Provenance,
    Span,
    labeled_from_record,
    make_labeled,
    record_from_labeled,
    with_spans,
)
from .corpus import CorpusStream, TokenClass, classify_token, tokenize
from .evaluation import evaluate_model
from .lexicon import Lexicon, auto_label
from .tagger import TaggerModel, TrainConfig, train

logger = logging.getLogger(__name__)

STATE_VERSION = 1


class Phase(Enum):
    A = "A"
    B = "B"
    C = "C"
    DONE = "DONE"


@dataclass(frozen=True)
class LoopParams:
    n0: int = 278
    n: int = 120
    nt: int = 500
    epsilon: float = 0.0
    conf_min: float = 0.45
    conf_max: float = 0.55

    def __post_init__(self) -> None:
        if self.n0 < 1 or self.n < 1 or self.nt < 1:
            raise ValueError("n0, n, and nt must be positive")
        if self.conf_min > self.conf_max:
            raise ValueError("conf_min must not exceed conf_max")


@dataclass
class LoopState:
    params: LoopParams
    stream_seed: int
    run_seed: int
    phase: Phase = Phase.A
    round: int = 0
    bootstrap: list[LabeledParagraph] = field(default_factory=list)
    gold: list[LabeledParagraph] = field(default_factory=list)
    test: list[LabeledParagraph] = field(default_factory=list)
    f1_history: list[tuple[int, float]] = field(default_factory=list)
    cursor: int = 0
    guard_round_done: bool = False
    flags: dict[str, bool] = field(default_factory=dict)


def derive_seed(base: int, tag: str) -> int:
    """Stable per-round seed: a function of the base seed and a tag only."""
    digest = hashlib.blake2b(f"{base}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def _records(lps: Sequence[LabeledParagraph]) -> list[dict]:
    return [record_from_labeled(lp) for lp in lps]


def state_to_json(state: LoopState) -> str:
    payload = {
        "version": STATE_VERSION,
        "params": {
            "n0": state.params.n0,
            "n": state.params.n,
            "nt": state.params.nt,
            "epsilon": state.params.epsilon,
            "conf_min": state.params.conf_min,
            "conf_max": state.params.conf_max,
        },
        "stream_seed": state.stream_seed,
        "run_seed": state.run_seed,
        "phase": state.phase.value,
        "round": state.round,
        "cursor": state.cursor,
        "guard_round_done": state.guard_round_done,
        "flags": state.flags,
        "f1_history": [[r, f] for r, f in state.f1_history],
        "bootstrap": _records(state.bootstrap),
        "gold": _records(state.gold),
        "test": _records(state.test),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def save_state(state: LoopState, path: str | Path) -> None:
    """Atomically persist the loop state (canonical encoding)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(state_to_json(state), encoding="utf-8")
    os.replace(tmp, path)


def load_state(path: str | Path) -> LoopState:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload["version"] != STATE_VERSION:
        raise ValueError(f"unsupported state version {payload['version']}")
    return LoopState(
        params=LoopParams(**payload["params"]),
        stream_seed=payload["stream_seed"],
        run_seed=payload["run_seed"],
        phase=Phase(payload["phase"]),
        round=payload["round"],
        bootstrap=[labeled_from_record(r) for r in payload["bootstrap"]],
        gold=[labeled_from_record(r) for r in payload["gold"]],
        test=[labeled_from_record(r) for r in payload["test"]],
        f1_history=[(r, f) for r, f in payload["f1_history"]],
        cursor=payload["cursor"],
        guard_round_done=payload["guard_round_done"],
        flags=dict(payload["flags"]),
    )


class Annotator(Protocol):
    def verify(self, silver: list[LabeledParagraph]) -> list[LabeledParagraph]:
        """Return the same paragraphs with corrected spans, provenance GOLD."""


class IdentityAnnotator:
    """Accepts every silver label unchanged (a perfectly agreeing reviewer)."""

    def verify(self, silver: list[LabeledParagraph]) -> list[LabeledParagraph]:
        return [with_spans(lp, lp.spans, Provenance.GOLD) for lp in silver]


class SimulatedAnnotator:
    """Restores true labels with a configurable human-style error rate.

    Each entity is independently perturbed with probability ``error_rate``
    by dropping it, shifting a boundary by one token, or keeping it while
    adding a spurious single-token entity elsewhere.  Noise for a
    paragraph depends only on (seed, doc_id, para_index), so verification
    results are identical regardless of batching or resume points.
    """

    def __init__(
        self,
        truth: Callable[[LabeledParagraph], list[Span]],
        error_rate: float = 0.0,
        seed: int = 0,
    ) -> None:
        if not (0.0 <= error_rate <= 1.0):
            raise ValueError("error_rate must be in [0, 1]")
        self.truth = truth
        self.error_rate = error_rate
        self.seed = seed

    def verify(self, silver: list[LabeledParagraph]) -> list[LabeledParagraph]:
        return [self._verify_one(lp) for lp in silver]

    def _rng_for(self, lp: LabeledParagraph) -> random.Random:
        doc_id, para_index = lp.key()
        return random.Random(derive_seed(self.seed, f"{doc_id}#{para_index}"))

    def _verify_one(self, lp: LabeledParagraph) -> LabeledParagraph:
        rng = self._rng_for(lp)
        true_spans = sorted(self.truth(lp))
        occupied: set[int] = set()

        def claim(span: Span) -> Span:
            occupied.update(range(span.token_start, span.token_end + 1))
            return span

        result: list[Span] = []
        spurious_wanted = 0
        # Tokens of kept entities are reserved up front so a boundary shift
        # can never collide with a span placed later.
        plan: list[tuple[Span, str]] = []
        for span in true_spans:
            kind = "keep"
            if self.error_rate and rng.random() < self.error_rate:
                kind = rng.choice(("drop", "shift", "add"))
            plan.append((span, kind))
            if kind != "drop":
                claim(span)
        for span, kind in plan:
            if kind == "drop":
                continue
            if kind == "shift":
                result.append(claim(self._shift(lp, span, occupied)))
                continue
            if kind == "add":
                spurious_wanted += 1
            result.append(span)
        for _ in range(spurious_wanted):
            extra = self._spurious(lp, occupied, rng)
            if extra is not None:
                result.append(claim(extra))
        return with_spans(lp, sorted(result), Provenance.GOLD)

    @staticmethod
    def _shift(lp: LabeledParagraph, span: Span, occupied: set[int]) -> Span:
        if span.token_end + 1 < len(lp.tokens) and span.token_end + 1 not in occupied:
            return Span(
                start=span.start,
                end=lp.tokens[span.token_end + 1].end,
                token_start=span.token_start,
                token_end=span.token_end + 1,
            )
        if span.token_start - 1 >= 0 and span.token_start - 1 not in occupied:
            return Span(
                start=lp.tokens[span.token_start - 1].start,
                end=span.end,
                token_start=span.token_start - 1,
                token_end=span.token_end,
            )
        return span

    @staticmethod
    def _spurious(
        lp: LabeledParagraph, occupied: set[int], rng: random.Random
    ) -> Span | None:
        candidates = [
            t.id
            for t in lp.tokens
            if t.id not in occupied and classify_token(t.text) is TokenClass.WORD
        ]
        if not candidates:
            return None
        tok = lp.tokens[rng.choice(candidates)]
        return Span(start=tok.start, end=tok.end, token_start=tok.id, token_end=tok.id)

class Trainer(Protocol):
    def __call__(
        self,
        data: list[LabeledParagraph],
        validation: list[LabeledParagraph] | None,
        seed: int,
    ) -> TaggerModel:
        """Train a model; must be deterministic given (data, validation, seed)."""


@dataclass
class TaggerTrainer:
    """Default trainer: the CRF tagger under a base config and gazetteer."""

    cfg: TrainConfig = field(default_factory=TrainConfig)
    lexicon: Lexicon | None = None

    def __call__(self, data, validation, seed):
        return train(data, replace(self.cfg, seed=seed), lexicon=self.lexicon, validation=validation)


class SelectionResult(NamedTuple):
    paragraphs: list[LabeledParagraph]
    exhausted: bool
    scanned: int
    requested: int

    @property
    def shortfall(self) -> int:
        return self.requested - len(self.paragraphs)


def select_uncertain(
    model, stream: CorpusStream, count: int, params: LoopParams
) -> SelectionResult:
    """Pull paragraphs containing at least one uncertain token.

    A paragraph qualifies when any token's entity confidence lies in
    [conf_min, conf_max] (inclusive); qualifying paragraphs are labeled
    with the model's own decode and returned as model-silver data.
    """
    selected: list[LabeledParagraph] = []
    scanned = 0
    exhausted = False
    while len(selected) < count:
        p = stream.next_paragraph()
        if p is None:
            exhausted = True
            break
        scanned += 1
        tokens = tokenize(p.text)
        if not tokens:
            continue
        conf = model.confidences(tokens)
        hit = ((conf >= params.conf_min) & (conf <= params.conf_max)).any()
        if not hit:
            continue
        spans = model.decode_spans(tokens).spans
        selected.append(make_labeled(p, spans, Provenance.SILVER_MODEL, tokens=tokens))
    if exhausted and len(selected) < count:
        logger.info(
            "uncertainty selection exhausted the stream: %d of %d after %d scanned",
            len(selected),
            count,
            scanned,
        )
    return SelectionResult(selected, exhausted, scanned, count)


def _train_val_split(items: list[LabeledParagraph]) -> tuple[list, list | None]:
    """First 60% (acquisition order) for training, remainder for validation."""
    if len(items) < 2:
        return list(items), None
    n_train = max(1, int(len(items) * 0.6))
    val = items[n_train:]
    return items[:n_train], (val or None)


Checkpoint = Callable[[LoopState], None]


def _noop_checkpoint(state: LoopState) -> None:
    return None


def run_bootstrap(
    state: LoopState,
    stream: CorpusStream,
    lexicon: Lexicon,
    annotator: Annotator,
    checkpoint: Checkpoint = _noop_checkpoint,
) -> LoopState:
    """Phase A: collect n0 gazetteer-matching paragraphs and verify them."""
    if state.phase is not Phase.A:
        raise ValueError(f"bootstrap must start in phase A, not {state.phase}")
    silver: list[LabeledParagraph] = []
    while len(silver) < state.params.n0:
        p = stream.next_paragraph()
        if p is None:
            state.flags["stream_exhausted"] = True
            state.flags["bootstrap_shortfall"] = True
            logger.warning(
                "stream exhausted during bootstrap: %d of %d matches",
                len(silver),
                state.params.n0,
            )
            break
        lp = auto_label(p, lexicon)
        if lp.spans:
            silver.append(lp)
    state.bootstrap = list(annotator.verify(silver))
    state.phase = Phase.B
    state.round = 0
    state.cursor = stream.cursor
    checkpoint(state)
    return state


def run_build_test_set(
    state: LoopState,
    stream: CorpusStream,
    annotator: Annotator,
    trainer: Trainer,
    checkpoint: Checkpoint = _noop_checkpoint,
) -> LoopState:
    """Phase B: grow the verified pool to nt, then carve test and gold sets."""
    if state.phase is not Phase.B:
        raise ValueError(f"build-test-set must start in phase B, not {state.phase}")
    params = state.params
    while len(state.bootstrap) < params.nt:
        train_part, val_part = _train_val_split(state.bootstrap)
        model = trainer(
            train_part, val_part, derive_seed(state.run_seed, f"B{state.round + 1}")
        )
        result = select_uncertain(model, stream, params.n, params)
        if result.paragraphs:
            verified = annotator.verify(result.paragraphs)
            state.bootstrap.extend(verified)
            state.round += 1
            state.cursor = stream.cursor
            checkpoint(state)
        if result.exhausted:
            state.flags["stream_exhausted"] = True
            if len(state.bootstrap) < params.nt:
                state.flags["test_set_shortfall"] = True
            state.cursor = stream.cursor
            checkpoint(state)
            break
    state.test = state.bootstrap[: params.nt]
    state.gold = state.bootstrap[params.nt :]
    state.bootstrap = []
    state.phase = Phase.C
    state.round = 0
    state.cursor = stream.cursor
    checkpoint(state)
    return state


def run_build_labeled_set(
    state: LoopState,
    stream: CorpusStream,
    annotator: Annotator,
    trainer: Trainer,
    checkpoint: Checkpoint = _noop_checkpoint,
) -> LoopState:
    """Phase C: train on gold, score on test, stop when F1 stops improving.

    When phase B consumed everything into the test set (|B| was exactly
    nt), a guard round first trains on the 60% acquisition-order split of
    the test set purely to drive one selection round; its score is not
    recorded and does not participate in the stopping rule.
    """
    if state.phase is not Phase.C:
        raise ValueError(f"build-labeled-set must start in phase C, not {state.phase}")
    params = state.params

    if not state.gold and not state.guard_round_done:
        train_part, val_part = _train_val_split(state.test)
        if train_part:
            model = trainer(train_part, val_part, derive_seed(state.run_seed, "C0"))
            result = select_uncertain(model, stream, params.n, params)
            if result.exhausted:
                state.flags["stream_exhausted"] = True
            if result.paragraphs:
                state.gold.extend(annotator.verify(result.paragraphs))
        state.guard_round_done = True
        state.cursor = stream.cursor
        checkpoint(state)

    if not state.gold:
        # Nothing to train on (guard round found no uncertain paragraphs,
        # or a resume landed here after that outcome).
        logger.warning("no gold paragraphs available for the labeled-set phase; stopping")
        state.phase = Phase.DONE
        checkpoint(state)
        return state

    while True:
        round_no = state.round + 1
        model = trainer(state.gold, None, derive_seed(state.run_seed, f"C{round_no}"))
        if len(state.f1_history) < round_no:
            _, f1 = evaluate_model(model, state.test)
            state.f1_history.append((round_no, f1))
            checkpoint(state)
        f1 = state.f1_history[round_no - 1][1]
        if round_no >= 2:
            improvement = f1 - state.f1_history[round_no - 2][1]
            if improvement <= params.epsilon:
                state.round = round_no
                break
        result = select_uncertain(model, stream, params.n, params)
        if result.exhausted:
            state.flags["stream_exhausted"] = True
        if result.paragraphs:
            state.gold.extend(annotator.verify(result.paragraphs))
        state.round = round_no
        state.cursor = stream.cursor
        checkpoint(state)
        if result.exhausted:
            break

    state.phase = Phase.DONE
    state.cursor = stream.cursor
    checkpoint(state)
    return state


def run_workflow(
    stream: CorpusStream,
    lexicon: Lexicon,
    annotator: Annotator,
    trainer: Trainer,
    params: LoopParams | None = None,
    run_seed: int = 13,
    state: LoopState | None = None,
    state_path: str | Path | None = None,
) -> LoopState:
    """Run (or resume) phases A -> B -> C, checkpointing after every round.

    Pass a loaded ``state`` to resume: the stream is fast-forwarded to the
    persisted cursor and completed rounds are never re-verified.
    """
    if state is None:
        state = LoopState(
            params=params or LoopParams(),
            stream_seed=stream.permutation_seed,
            run_seed=run_seed,
        )
    else:
        if state.stream_seed != stream.permutation_seed:
            raise ValueError(
                f"state was created with stream seed {state.stream_seed}, "
                f"got a stream seeded {stream.permutation_seed}"
            )
        stream.advance_to(state.cursor)

    checkpoint: Checkpoint = _noop_checkpoint
    if state_path is not None:
        checkpoint = lambda s: save_state(s, state_path)  # noqa: E731

    if state.phase is Phase.A:
        run_bootstrap(state, stream, lexicon, annotator, checkpoint)
    if state.phase is Phase.B:
        run_build_test_set(state, stream, annotator, trainer, checkpoint)
    if state.phase is Phase.C:
        run_build_labeled_set(state, stream, annotator, trainer, checkpoint)
    return state
