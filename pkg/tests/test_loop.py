"""Workflow phases: selection predicate, round arithmetic, stop rule, resume."""

import numpy as np
import pytest

from nerloop.annotations import Provenance, Span
from nerloop.corpus import CorpusStream, Paragraph, corpus_from_documents, tokenize
from nerloop.lexicon import Lexicon
from nerloop.loop import (
    IdentityAnnotator,
    LoopParams,
    LoopState,
    Phase,
    SimulatedAnnotator,
    TaggerTrainer,
    derive_seed,
    load_state,
    run_bootstrap,
    run_build_labeled_set,
    run_build_test_set,
    run_workflow,
    save_state,
    select_uncertain,
    state_to_json,
)
from nerloop.synthetic import generate, labeled_with_truth
from nerloop.tagger import TrainConfig

from test_annotations import lp_from_text


class FixedConfidenceModel:
    """Fake tagger: per-token confidence from a text-keyed table."""

    def __init__(self, table=None, default=0.5, spans_for=None):
        self.table = table or {}
        self.default = default
        self.spans_for = spans_for or (lambda tokens: [])

    def confidences(self, tokens):
        text = " ".join(t.text for t in tokens)
        value = self.table.get(text, self.default)
        return np.full(len(tokens), value)

    def decode_spans(self, tokens):
        import types

        return types.SimpleNamespace(spans=self.spans_for(tokens), repairs=0)

    def decode(self, tokens):
        return ["O"] * len(tokens)


def make_stream(texts, seed=3):
    docs = [(f"d{i}", [t]) for i, t in enumerate(texts)]
    return corpus_from_documents(docs, seed)


def test_select_inclusive_band_boundaries():
    params = LoopParams(n0=1, n=10, nt=1)
    texts = ["at band low", "at band high", "way below", "way above", "dead center"]
    table = {
        "at band low": 0.45,
        "at band high": 0.55,
        "way below": 0.10,
        "way above": 0.90,
        "dead center": 0.50,
    }
    stream = make_stream(texts)
    result = select_uncertain(FixedConfidenceModel(table), stream, 10, params)
    picked = {lp.text for lp in result.paragraphs}
    assert picked == {"at band low", "at band high", "dead center"}
    assert result.exhausted
    assert result.shortfall == 7


def test_select_stops_at_count():
    params = LoopParams(n0=1, n=2, nt=1)
    stream = make_stream([f"para number {i}" for i in range(10)])
    result = select_uncertain(FixedConfidenceModel(default=0.5), stream, 2, params)
    assert len(result.paragraphs) == 2
    assert not result.exhausted
    assert result.paragraphs[0].provenance is Provenance.SILVER_MODEL


def test_select_exhaustion_with_no_hits():
    params = LoopParams(n0=1, n=5, nt=1)
    stream = make_stream(["confident one", "confident two"])
    result = select_uncertain(FixedConfidenceModel(default=0.99), stream, 5, params)
    assert result.paragraphs == []
    assert result.exhausted
    assert result.scanned == 2


def drug_lexicon():
    lex = Lexicon()
    lex.add("drugx")
    return lex


def matching_corpus(n, extra=0):
    texts = [f"drugx appears in paragraph {i}" for i in range(n)]
    texts += [f"nothing in paragraph {i + n}" for i in range(extra)]
    return make_stream(texts)


def test_bootstrap_collects_n0_verified():
    params = LoopParams(n0=10, n=5, nt=20)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(30, extra=10)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    assert state.phase is Phase.B
    assert len(state.bootstrap) == 10
    assert all(lp.provenance is Provenance.GOLD for lp in state.bootstrap)
    assert all(lp.spans for lp in state.bootstrap)


def test_bootstrap_shortfall_flagged():
    params = LoopParams(n0=5, n=2, nt=4)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(3, extra=4)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    assert len(state.bootstrap) == 3
    assert state.flags["bootstrap_shortfall"]


class StubTrainer:
    """Returns a fixed fake model; records the training sets it saw."""

    def __init__(self, model):
        self.model = model
        self.calls = []

    def __call__(self, data, validation, seed):
        self.calls.append((len(data), len(validation or []), seed))
        return self.model


def test_phase_b_round_arithmetic_at_full_scale_defaults():
    # 278 -> 398 -> 518 in two rounds; test gets 500, gold the 18 left over.
    params = LoopParams(n0=278, n=120, nt=500)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(600)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    assert len(state.bootstrap) == 278

    trainer = StubTrainer(FixedConfidenceModel(default=0.5))
    run_build_test_set(state, stream, IdentityAnnotator(), trainer)
    assert state.phase is Phase.C
    assert [c[0] for c in trainer.calls] == [166, 238]  # 60% of 278, 60% of 398
    assert len(state.test) == 500
    assert len(state.gold) == 18
    assert state.bootstrap == []


def test_phase_b_zero_rounds_when_nt_below_n0():
    params = LoopParams(n0=10, n=5, nt=8)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(30)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    trainer = StubTrainer(FixedConfidenceModel(default=0.5))
    run_build_test_set(state, stream, IdentityAnnotator(), trainer)
    assert trainer.calls == []
    assert len(state.test) == 8
    assert len(state.gold) == 2


def test_phase_b_stream_exhaustion_flagged():
    params = LoopParams(n0=5, n=5, nt=20)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(8)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    trainer = StubTrainer(FixedConfidenceModel(default=0.5))
    run_build_test_set(state, stream, IdentityAnnotator(), trainer)
    assert state.flags["stream_exhausted"]
    assert state.flags["test_set_shortfall"]
    assert len(state.test) < 20


def run_phase_c_with_f1_sequence(monkeypatch, f1_values, n_gold=4):
    """Drive phase C with scripted per-round F1 scores."""
    params = LoopParams(n0=2, n=2, nt=4, epsilon=0.0)
    state = LoopState(params=params, stream_seed=3, run_seed=1, phase=Phase.C)
    state.test = [
        lp_from_text(f"test para {i}", [], doc_id=f"t{i}") for i in range(4)
    ]
    state.gold = [
        lp_from_text(f"gold para {i}", [], doc_id=f"g{i}") for i in range(n_gold)
    ]
    stream = matching_corpus(50)
    scores = iter(f1_values)
    monkeypatch.setattr(
        "nerloop.loop.evaluate_model", lambda model, data: (None, next(scores))
    )
    trainer = StubTrainer(FixedConfidenceModel(default=0.5))
    run_build_labeled_set(state, stream, IdentityAnnotator(), trainer)
    return state, trainer


def test_phase_c_stops_on_zero_improvement(monkeypatch):
    state, trainer = run_phase_c_with_f1_sequence(monkeypatch, [0.60, 0.65, 0.65])
    assert state.phase is Phase.DONE
    assert [f for _, f in state.f1_history] == [0.60, 0.65, 0.65]
    assert len(trainer.calls) == 3


def test_phase_c_stops_on_decline(monkeypatch):
    state, _ = run_phase_c_with_f1_sequence(monkeypatch, [0.60, 0.59])
    assert [f for _, f in state.f1_history] == [0.60, 0.59]


def test_phase_c_round_count_matches_history(monkeypatch):
    state, _ = run_phase_c_with_f1_sequence(monkeypatch, [0.5, 0.6, 0.7, 0.7])
    assert len(state.f1_history) == state.round


def test_simulated_annotator_zero_error_restores_truth():
    corpus = generate(n_paragraphs=40, n_lexicon_terms=20, n_extra_terms=5, seed=3)
    stream = corpus_from_documents(corpus.documents, 42)
    lps = [labeled_with_truth(corpus, p) for p in stream]
    silver = [lp for lp in lps if lp.spans][:10]
    annotator = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.0, seed=1)
    for original, verified in zip(silver, annotator.verify(silver)):
        assert verified.spans == original.spans
        assert verified.provenance is Provenance.GOLD


def test_simulated_annotator_is_batch_invariant():
    corpus = generate(n_paragraphs=40, n_lexicon_terms=20, n_extra_terms=5, seed=3)
    stream = corpus_from_documents(corpus.documents, 42)
    lps = [labeled_with_truth(corpus, p) for p in stream][:12]
    annotator = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.5, seed=9)
    whole = annotator.verify(lps)
    pieces = annotator.verify(lps[:5]) + annotator.verify(lps[5:])
    assert [lp.spans for lp in whole] == [lp.spans for lp in pieces]
    again = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.5, seed=9).verify(lps)
    assert [lp.spans for lp in whole] == [lp.spans for lp in again]


def test_simulated_annotator_perturbs_at_roughly_error_rate():
    corpus = generate(n_paragraphs=400, n_lexicon_terms=60, n_extra_terms=20, seed=3)
    stream = corpus_from_documents(corpus.documents, 42)
    lps = [lp for lp in (labeled_with_truth(corpus, p) for p in stream) if lp.spans]
    annotator = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=4)
    total = missing = 0
    for lp in lps:
        verified = annotator.verify([lp])[0]
        truth, got = set(lp.spans), set(verified.spans)
        total += len(truth)
        missing += len(truth - got)
    # Dropped and shifted entities stop matching exactly; spurious adds
    # leave truth intact, so missing truth is roughly 2/3 of the error rate.
    rate = missing / total
    assert 0.06 < rate < 0.25


def test_state_save_load_round_trip(tmp_path):
    params = LoopParams(n0=3, n=2, nt=4)
    state = LoopState(params=params, stream_seed=3, run_seed=1)
    stream = matching_corpus(10)
    run_bootstrap(state, stream, drug_lexicon(), IdentityAnnotator())
    state.f1_history = [(1, 0.5)]
    path = tmp_path / "state.json"
    save_state(state, path)
    loaded = load_state(path)
    assert state_to_json(loaded) == state_to_json(state)
    assert loaded.phase is state.phase
    assert loaded.bootstrap == state.bootstrap


def test_default_params():
    params = LoopParams()
    assert (params.n0, params.n, params.nt) == (278, 120, 500)
    assert params.epsilon == 0.0
    assert (params.conf_min, params.conf_max) == (0.45, 0.55)


def test_params_validation():
    with pytest.raises(ValueError):
        LoopParams(n0=0)
    with pytest.raises(ValueError):
        LoopParams(conf_min=0.6, conf_max=0.5)


def test_derive_seed_is_stable_and_tag_sensitive():
    assert derive_seed(13, "B1") == derive_seed(13, "B1")
    assert derive_seed(13, "B1") != derive_seed(13, "B2")
    assert derive_seed(13, "B1") != derive_seed(14, "B1")


class CrashingAnnotator:
    """Verifies normally until the k-th call, then raises."""

    def __init__(self, inner, crash_on_call):
        self.inner = inner
        self.crash_on_call = crash_on_call
        self.calls = 0

    def verify(self, silver):
        self.calls += 1
        if self.calls == self.crash_on_call:
            raise RuntimeError("annotator went home")
        return self.inner.verify(silver)


def small_workflow_inputs(tmp_path=None):
    corpus = generate(n_paragraphs=700, n_lexicon_terms=80, n_extra_terms=30, seed=11)
    params = LoopParams(n0=15, n=10, nt=30)
    cfg = TrainConfig(max_epochs=12, seed=0)
    trainer = TaggerTrainer(cfg=cfg, lexicon=corpus.lexicon)
    annot = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=21)
    return corpus, params, trainer, annot


def test_workflow_resume_equals_uninterrupted(tmp_path):
    corpus, params, trainer, _ = small_workflow_inputs()

    # Uninterrupted reference run.
    stream = corpus_from_documents(corpus.documents, 42)
    annot = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=21)
    ref_path = tmp_path / "ref.json"
    ref = run_workflow(stream, corpus.lexicon, annot, trainer, params, run_seed=5, state_path=ref_path)
    assert ref.phase is Phase.DONE

    # Killed during phase B (second annotator call = phase B round 1).
    crash_path = tmp_path / "crash.json"
    stream2 = corpus_from_documents(corpus.documents, 42)
    crasher = CrashingAnnotator(
        SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=21), crash_on_call=3
    )
    with pytest.raises(RuntimeError):
        run_workflow(stream2, corpus.lexicon, crasher, trainer, params, run_seed=5, state_path=crash_path)

    interrupted = load_state(crash_path)
    assert interrupted.phase in (Phase.B, Phase.C)

    # Resume with a fresh stream and a healthy annotator.
    stream3 = corpus_from_documents(corpus.documents, 42)
    annot3 = SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=21)
    resumed = run_workflow(
        stream3, corpus.lexicon, annot3, trainer, state=interrupted, state_path=crash_path
    )
    assert resumed.phase is Phase.DONE
    assert crash_path.read_bytes() == ref_path.read_bytes()


def test_workflow_checkpoint_preserves_completed_rounds(tmp_path):
    corpus, params, trainer, _ = small_workflow_inputs()
    stream = corpus_from_documents(corpus.documents, 42)
    crash_path = tmp_path / "crash.json"
    crasher = CrashingAnnotator(
        SimulatedAnnotator(corpus.truth_oracle(), error_rate=0.2, seed=21), crash_on_call=2
    )
    with pytest.raises(RuntimeError):
        run_workflow(stream, corpus.lexicon, crasher, trainer, params, run_seed=5, state_path=crash_path)
    saved = load_state(crash_path)
    # Bootstrap (annotator call 1) completed and was persisted.
    assert len(saved.bootstrap) == params.n0


def test_test_set_is_frozen_through_phase_c(tmp_path):
    corpus, params, trainer, annot = small_workflow_inputs()
    stream = corpus_from_documents(corpus.documents, 42)
    seen_test_hashes = []

    state = LoopState(params=params, stream_seed=42, run_seed=5)
    run_bootstrap(state, stream, corpus.lexicon, annot)
    run_build_test_set(state, stream, annot, trainer)
    import json

    def freeze(s):
        return json.dumps([(lp.key(), [tuple(sorted((sp.start, sp.end))) for sp in lp.spans]) for lp in s.test], default=str)

    before = freeze(state)
    run_build_labeled_set(state, stream, annot, trainer)
    assert freeze(state) == before
    assert state.phase is Phase.DONE
    assert len(state.f1_history) >= 1


def test_every_annotator_batch_satisfies_selection_contract():
    corpus, params, trainer, annot = small_workflow_inputs()
    stream = corpus_from_documents(corpus.documents, 42)

    presented = []

    class RecordingAnnotator:
        def verify(self, silver):
            presented.append(list(silver))
            return annot.verify(silver)

    state = run_workflow(
        stream, corpus.lexicon, RecordingAnnotator(), trainer, params, run_seed=5
    )
    assert state.phase is Phase.DONE
    # Phase A batch: every paragraph has at least one lexicon match.
    for lp in presented[0]:
        assert lp.spans
        assert lp.provenance is Provenance.SILVER_LEXICON
    # Later batches: model-silver provenance; no paragraph repeats anywhere.
    keys = [lp.key() for batch in presented for lp in batch]
    assert len(keys) == len(set(keys))
    for batch in presented[1:]:
        for lp in batch:
            assert lp.provenance is Provenance.SILVER_MODEL


def test_phase_c_with_no_gold_after_guard_stops_cleanly():
    # Resume edge: guard round already ran and produced nothing.
    state = LoopState(
        params=LoopParams(n0=2, n=2, nt=4), stream_seed=1, run_seed=1,
        phase=Phase.C, guard_round_done=True,
    )
    stream = make_stream(["some text here"])
    out = run_build_labeled_set(state, stream, IdentityAnnotator(), trainer=lambda *a: None)
    assert out.phase is Phase.DONE
    assert out.f1_history == []


def test_simulated_annotator_never_produces_overlaps_under_max_noise():
    corpus = generate(n_paragraphs=300, n_lexicon_terms=60, n_extra_terms=20, seed=13)
    stream = corpus_from_documents(corpus.documents, 42)
    lps = [lp for lp in (labeled_with_truth(corpus, p) for p in stream) if lp.spans]
    annotator = SimulatedAnnotator(corpus.truth_oracle(), error_rate=1.0, seed=8)
    for verified in annotator.verify(lps):
        prev_end = -1
        for s in verified.spans:  # with_spans re-validates; assert anyway
            assert s.token_start > prev_end
            prev_end = s.token_end
