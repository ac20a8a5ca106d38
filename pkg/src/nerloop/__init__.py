"""Model-in-the-loop NER annotation toolkit.

A gazetteer bootstraps silver labels, a linear-chain CRF tagger learns
from verified paragraphs, uncertainty sampling routes borderline
paragraphs to reviewers, and two trained model variants vote over a whole
corpus to rank candidate entities.
"""

from .annotations import (
    IobDecodeResult,
    LabeledParagraph,
    Provenance,
    Span,
    export_iob_csv,
    iob_to_spans,
    read_dataset,
    spans_to_iob,
    write_dataset,
)
from .corpus import (
    CorpusStream,
    Paragraph,
    Token,
    TokenClass,
    classify_token,
    load_corpus,
    tokenize,
)
from .evaluation import (
    ContextScope,
    EvalCounts,
    context_frequencies,
    kfold_run,
    kfold_split,
    prf1,
    score_entities,
)
from .extraction import (
    Balance,
    EntityTally,
    ExtractionReport,
    classify_balanced,
    compare_reference,
    extract_corpus,
)
from .lexicon import Lexicon, auto_label, load_lexicon
from .loop import (
    Annotator,
    IdentityAnnotator,
    LoopParams,
    LoopState,
    Phase,
    SimulatedAnnotator,
    TaggerTrainer,
    load_state,
    run_workflow,
    save_state,
    select_uncertain,
)
from .tagger import TaggerModel, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Annotator",
    "Balance",
    "ContextScope",
    "CorpusStream",
    "EntityTally",
    "EvalCounts",
    "ExtractionReport",
    "IdentityAnnotator",
    "IobDecodeResult",
    "LabeledParagraph",
    "Lexicon",
    "LoopParams",
    "LoopState",
    "Paragraph",
    "Phase",
    "Provenance",
    "SimulatedAnnotator",
    "Span",
    "TaggerModel",
    "TaggerTrainer",
    "Token",
    "TokenClass",
    "TrainConfig",
    "auto_label",
    "classify_balanced",
    "classify_token",
    "compare_reference",
    "context_frequencies",
    "export_iob_csv",
    "extract_corpus",
    "iob_to_spans",
    "kfold_run",
    "kfold_split",
    "load_corpus",
    "load_lexicon",
    "load_state",
    "prf1",
    "read_dataset",
    "run_workflow",
    "save_state",
    "score_entities",
    "select_uncertain",
    "spans_to_iob",
    "tokenize",
    "train",
    "write_dataset",
]
