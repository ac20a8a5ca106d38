"""Trainable sequence tagger: CRF training, decoding, token confidences.

Training maximizes the L2-regularized log-likelihood of IOB sequences with
AdaGrad steps over shuffled mini-batches, runs for a fixed epoch budget
(default 64), and keeps the parameters from the epoch with the lowest
validation loss.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import crf
from .annotations import IobDecodeResult, LabeledParagraph, iob_to_spans, spans_to_iob
from .corpus import Token
from .features import FeatureConfig, extract_features, lexicon_keys
from .lexicon import Lexicon

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    max_epochs: int = 64
    l2: float = 1e-3
    learning_rate: float = 0.5
    early_stopping: bool = True
    seed: int = 13
    validation_split: float = 0.1
    batch_size: int = 8
    variant: str = "a"

    def __post_init__(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not (0.0 < self.validation_split < 1.0):
            raise ValueError("validation_split must be in (0, 1)")


@dataclass
class TaggerModel:
    """A trained tagger: feature table, weights, transitions, metadata.

    Immutable after training; decode() and confidences() are safe to call
    from any number of threads.
    """

    feature_config: FeatureConfig
    feature_vocab: dict[str, int]
    weights: np.ndarray
    transitions: np.ndarray
    lexicon_terms: frozenset[str] = frozenset()
    training_meta: dict = field(default_factory=dict)
    labels: tuple[str, ...] = crf.LABELS

    def encode(self, tokens: list[Token]) -> list[np.ndarray]:
        """Map tokens to known-feature id arrays; unknown features are ignored."""
        vocab = self.feature_vocab
        return [
            np.array([vocab[f] for f in feats if f in vocab], dtype=np.intp)
            for feats in extract_features(tokens, self.lexicon_terms, self.feature_config)
        ]

    def decode(self, tokens: list[Token]) -> list[str]:
        """Viterbi-best IOB labels; always a valid sequence."""
        if not tokens:
            return []
        em = crf.emission_scores(self.encode(tokens), self.weights)
        return [crf.LABELS[i] for i in crf.viterbi(em, self.transitions)]

    def decode_spans(self, tokens: list[Token]) -> IobDecodeResult:
        return iob_to_spans(tokens, self.decode(tokens))

    def confidences(self, tokens: list[Token]) -> np.ndarray:
        """Per-token probability of being inside an entity: P(B) + P(I)."""
        if not tokens:
            return np.zeros(0)
        em = crf.emission_scores(self.encode(tokens), self.weights)
        marg = crf.marginals(em, self.transitions)
        return marg[:, crf.L_B] + marg[:, crf.L_I]

    def save(self, path: str | Path) -> None:
        header = {
            "version": CHECKPOINT_VERSION,
            "labels": list(self.labels),
            "feature_config": {
                "variant": self.feature_config.variant,
                "use_lexicon": self.feature_config.use_lexicon,
                "neighbor_offsets": list(self.feature_config.neighbor_offsets),
                "affix_lengths": list(self.feature_config.affix_lengths),
            },
            "feature_vocab": self.feature_vocab,
            "lexicon_terms": sorted(self.lexicon_terms),
            "training_meta": self.training_meta,
        }
        buf = io.BytesIO()
        np.savez_compressed(
            buf,
            header=np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
            weights=self.weights,
            transitions=self.transitions,
        )
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "TaggerModel":
        with np.load(io.BytesIO(Path(path).read_bytes())) as data:
            header = json.loads(bytes(data["header"]).decode("utf-8"))
            if header["version"] != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {header['version']}")
            fc = header["feature_config"]
            return cls(
                feature_config=FeatureConfig(
                    variant=fc["variant"],
                    use_lexicon=fc["use_lexicon"],
                    neighbor_offsets=tuple(fc["neighbor_offsets"]),
                    affix_lengths=tuple(fc["affix_lengths"]),
                ),
                feature_vocab=header["feature_vocab"],
                weights=data["weights"],
                transitions=data["transitions"],
                lexicon_terms=frozenset(header["lexicon_terms"]),
                training_meta=header["training_meta"],
                labels=tuple(header["labels"]),
            )


def _encode_training(
    lps: list[LabeledParagraph],
    vocab: dict[str, int],
    terms: frozenset[str],
    cfg: FeatureConfig,
    grow: bool,
) -> list[tuple[list[np.ndarray], np.ndarray]]:
    seqs = []
    for lp in lps:
        feats = []
        for fs in extract_features(lp.tokens, terms, cfg):
            ids = []
            for f in fs:
                idx = vocab.get(f)
                if idx is None and grow:
                    idx = vocab[f] = len(vocab)
                if idx is not None:
                    ids.append(idx)
            feats.append(np.array(ids, dtype=np.intp))
        labels = np.array([crf.LABELS.index(l) for l in spans_to_iob(lp)], dtype=np.intp)
        seqs.append((feats, labels))
    return seqs


def train(
    data: list[LabeledParagraph],
    cfg: TrainConfig | None = None,
    lexicon: Lexicon | frozenset[str] | None = None,
    validation: list[LabeledParagraph] | None = None,
) -> TaggerModel:
    """Train a tagger on labeled paragraphs.

    When ``validation`` is not supplied, the last 10% (``validation_split``)
    of the seed-shuffled data is held out.  The returned model carries the
    parameters from the epoch with the lowest validation loss.
    """
    cfg = cfg or TrainConfig()
    if not data:
        raise ValueError("training data is empty")
    if all(not lp.spans for lp in data):
        logger.warning("training data contains no entity spans; model will be degenerate")

    rng = np.random.default_rng(cfg.seed)
    feature_config = FeatureConfig.for_variant(cfg.variant)
    terms = lexicon_keys(lexicon)

    if validation is None:
        order = rng.permutation(len(data))
        shuffled = [data[i] for i in order]
        if len(shuffled) < 2:
            train_part, val_part = shuffled, shuffled
        else:
            n_val = max(1, int(len(shuffled) * cfg.validation_split))
            train_part, val_part = shuffled[:-n_val], shuffled[-n_val:]
    else:
        train_part, val_part = list(data), list(validation)

    vocab: dict[str, int] = {}
    train_seqs = _encode_training(train_part, vocab, terms, feature_config, grow=True)
    val_seqs = _encode_training(val_part, vocab, terms, feature_config, grow=False)

    weights = np.zeros((len(vocab), crf.NUM_LABELS))
    trans = np.zeros((crf.NUM_LABELS, crf.NUM_LABELS))
    gsq_w = np.zeros_like(weights)
    gsq_t = np.zeros_like(trans)

    best_val = np.inf
    best_epoch = 0
    best_params = (weights.copy(), trans.copy())
    train_losses: list[float] = []
    val_losses: list[float] = []

    n = len(train_seqs)
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = [train_seqs[i] for i in perm[lo : lo + cfg.batch_size]]
            _, g_w, g_t = crf.nll_gradients(batch, weights, trans, cfg.l2)
            gsq_w += g_w**2
            gsq_t += g_t**2
            weights -= cfg.learning_rate * g_w / (np.sqrt(gsq_w) + 1e-8)
            trans -= cfg.learning_rate * g_t / (np.sqrt(gsq_t) + 1e-8)
        train_losses.append(crf.neg_log_likelihood(train_seqs, weights, trans, cfg.l2))
        val_losses.append(crf.neg_log_likelihood(val_seqs, weights, trans))
        if val_losses[-1] < best_val:
            best_val = val_losses[-1]
            best_epoch = epoch
            best_params = (weights.copy(), trans.copy())

    if cfg.early_stopping:
        weights, trans = best_params
    return TaggerModel(
        feature_config=feature_config,
        feature_vocab=vocab,
        weights=weights,
        transitions=trans,
        lexicon_terms=terms,
        training_meta={
            "seed": cfg.seed,
            "epochs_run": cfg.max_epochs,
            "best_epoch": best_epoch,
            "best_validation_loss": best_val,
            "train_loss_history": train_losses,
            "val_loss_history": val_losses,
        },
    )


