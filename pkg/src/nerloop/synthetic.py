"""Synthetic corpus, gazetteer, and truth oracle for desk-scale runs.

Generates drug-like entity names from syllables plus characteristic
suffixes, plants them in varied sentence contexts (dosing, comparison,
efficacy), and mixes in confuser vocabulary: gene symbols, reagents in
treatment-like contexts, and drug-shaped author surnames in citations.
The gazetteer deliberately covers only part of the true vocabulary so a
trained model must generalize from shape and context, as with a real
incomplete ontology.

The truth oracle records exactly which character spans were planted, so a
simulated annotator can restore (noisily) correct labels for any
generated paragraph.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .annotations import LabeledParagraph, Provenance, Span, make_labeled
from .corpus import Paragraph, tokenize
from .lexicon import Lexicon

_SYLLABLES = [
    "ba", "ce", "da", "fa", "ga", "hi", "ka", "le", "mi", "no",
    "pa", "qui", "ra", "se", "ti", "va", "xi", "zo", "del", "mor",
    "lan", "ter", "fos", "gan", "lim", "rem",
]
_SUFFIXES = [
    "vir", "mab", "cin", "zole", "pine", "olol", "navir", "tide",
    "prazole", "oxacin", "statin", "cillin",
]
_ACID_HEADS = ["ic", "onic", "ilic"]

_GENES = [
    "TNF", "ACE2", "IL-6", "RdRp", "NSP5", "ORF1ab", "STAT1", "KLK5",
    "MPRO", "TMPRSS2", "IFN-b", "CD4", "IL-10", "NF-kB", "JAK2", "EGFR",
]
_REAGENTS = [
    "dithiothreitol", "phosphate buffer", "saline", "ethanol", "glycerol",
    "trypsin", "albumin", "agarose", "formalin", "heparinase", "paraffin",
    "methanol", "acetone", "chloroform", "luciferase",
]
_VIRUSES = ["SARS-CoV-2", "ZIKV", "HCV", "influenza", "MERS-CoV", "RSV", "HIV-1", "DENV"]
_METHODS = [
    "ELISA", "RT-PCR", "chromatography", "mass spectrometry", "flow cytometry",
    "western blotting", "immunostaining", "plaque assay",
]
_TOPICS = [
    "fever", "pneumonia", "lymphopenia", "inflammation", "hypoxia",
    "mortality", "viremia", "seroconversion", "coagulopathy", "fibrosis",
    "comorbidities", "hospitalization", "oxygenation", "prognosis",
]
_COHORTS = [
    "adults", "children", "ferrets", "macaques", "mice", "volunteers",
    "outpatients", "healthcare workers", "transplant recipients",
]

# Entity-bearing sentences: dosing and efficacy frames, plus lab-flavored
# frames that overlap the reagent/gene contexts below.
_DRUG_TEMPLATES = [
    "{drug} was administered once daily at {num} mg.",
    "Patients received {drug} for {num} days.",
    "Treatment with {drug} reduced viral load in most {cohort}.",
    "{drug}, an approved inhibitor, can inhibit replication of {virus} strains.",
    "The efficacy of {drug} against {virus} was evaluated in vitro.",
    "{drug} and {drug2} were compared in a randomized trial.",
    "Oral {drug} ({num} mg) was well tolerated.",
    "Prophylaxis with {drug} prevented infection in {num} of the {cohort}.",
    "A daily dose of {drug} was given to all recipients.",
    "Clinical improvement followed {drug} treatment within {num} days.",
    "Serum concentrations of {drug} were measured at {num} h.",
    "{drug} suppressed {gene} activity in infected cells.",
    "Combination therapy with {drug} and {drug2} is under investigation for {topic}.",
    "Intravenous {drug} shortened the duration of {topic}.",
]

# No entities: study boilerplate over a broad noun inventory.
_NEUTRAL_TEMPLATES = [
    "The study enrolled {num} {cohort} across {num2} sites.",
    "Expression of {gene} increased markedly after infection.",
    "Samples were analyzed by {method} in triplicate.",
    "{virus} replication was measured in cell culture.",
    "The {gene} protein binds directly to the host receptor.",
    "Results were considered significant below a threshold of 0.05.",
    "Viral RNA was quantified using {method}.",
    "Sequencing reads were aligned to the reference genome.",
    "Severe {topic} was the most common complication among {cohort}.",
    "Rates of {topic} declined over the observation period.",
    "{method} confirmed the presence of {gene} transcripts.",
    "No association between {topic} and outcome was observed.",
]

# No entities, but in frames that elsewhere carry drugs: reagents being
# administered, gene products being inhibited, and drug-shaped surnames.
_AMBIGUOUS_TEMPLATES = [
    "Cells were treated with {reagent} for {num} h before analysis.",
    "Plates were washed with {reagent} and incubated overnight.",
    "{gene} inhibitors were screened against {virus} in culture.",
    "Aliquots of {reagent} were added at {num} mM.",
    "A protocol adapted from {surname} et al. was followed.",
    "The approach of {surname} et al. gave comparable yields.",
    "Mice received daily {reagent} injections as a control.",
    "Blocking {gene} attenuated the response to {virus}.",
    "{reagent} exposure did not alter {gene} expression.",
    "Doses of {reagent} above {num} mM proved cytotoxic.",
]


@dataclass
class SyntheticCorpus:
    documents: list[tuple[str, list[str]]]
    lexicon: Lexicon
    reference: Lexicon
    truth: dict[tuple[str, int], list[tuple[int, int]]] = field(default_factory=dict)
    seed: int = 0

    def truth_spans(self, lp: LabeledParagraph) -> list[Span]:
        """Token-aligned true entity spans for a generated paragraph."""
        key = lp.key()
        out = []
        for start, end in self.truth.get(key, []):
            covered = [t for t in lp.tokens if t.start >= start and t.end <= end]
            if not covered:
                continue
            out.append(
                Span(
                    start=covered[0].start,
                    end=covered[-1].end,
                    token_start=covered[0].id,
                    token_end=covered[-1].id,
                )
            )
        return sorted(out)

    def truth_oracle(self):
        return self.truth_spans

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Write corpus.jsonl, lexicon.csv, reference.csv, and truth.jsonl."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out_dir / "corpus.jsonl",
            "lexicon": out_dir / "lexicon.csv",
            "reference": out_dir / "reference.csv",
            "truth": out_dir / "truth.jsonl",
        }
        with paths["corpus"].open("w", encoding="utf-8") as f:
            for doc_id, paras in self.documents:
                f.write(json.dumps({"doc_id": doc_id, "paragraphs": paras}) + "\n")
        _write_lexicon_csv(self.lexicon, paths["lexicon"])
        _write_lexicon_csv(self.reference, paths["reference"])
        with paths["truth"].open("w", encoding="utf-8") as f:
            for (doc_id, para_index), spans in sorted(self.truth.items()):
                f.write(
                    json.dumps(
                        {"doc_id": doc_id, "para_index": para_index, "char_spans": spans}
                    )
                    + "\n"
                )
        return paths


def _write_lexicon_csv(lex: Lexicon, path: Path) -> None:
    alias_by_term: dict[str, list[str]] = {}
    for alias, canonical in lex.aliases.items():
        alias_by_term.setdefault(canonical, []).append(alias)
    with path.open("w", encoding="utf-8") as f:
        f.write("name,aliases,code\n")
        for term in sorted(lex.terms):
            aliases = ";".join(sorted(alias_by_term.get(term, [])))
            code = lex.metadata.get(term) or ""
            f.write(f"{term},{aliases},{code}\n")


def load_truth(path: str | Path):
    """Load a truth.jsonl file into a truth-oracle callable."""
    table: dict[tuple[str, int], list[tuple[int, int]]] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            table[(rec["doc_id"], rec["para_index"])] = [
                (int(a), int(b)) for a, b in rec["char_spans"]
            ]

    def oracle(lp: LabeledParagraph) -> list[Span]:
        out = []
        for start, end in table.get(lp.key(), []):
            covered = [t for t in lp.tokens if t.start >= start and t.end <= end]
            if covered:
                out.append(
                    Span(
                        start=covered[0].start,
                        end=covered[-1].end,
                        token_start=covered[0].id,
                        token_end=covered[-1].id,
                    )
                )
        return sorted(out)

    return oracle


def _make_names(rng: random.Random, count: int) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()
    while len(names) < count:
        roll = rng.random()
        if roll < 0.10:
            head = "".join(rng.sample(_SYLLABLES, rng.randint(1, 2))) + rng.choice(_ACID_HEADS)
            name = f"{head} {rng.choice(['acid', 'sodium', 'sulfate'])}"
        elif roll < 0.22:
            # Development-code names; same surface shape as gene symbols,
            # so only context can resolve them.
            name = (
                chr(rng.randint(65, 90))
                + chr(rng.randint(65, 90))
                + "-"
                + str(rng.randint(100, 9999))
            )
        else:
            name = "".join(rng.sample(_SYLLABLES, rng.randint(1, 2))) + rng.choice(_SUFFIXES)
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


class _ParagraphBuilder:
    """Accumulates sentence text while recording planted entity offsets."""

    def __init__(self) -> None:
        self.parts: list[str] = []
        self.length = 0
        self.spans: list[tuple[int, int]] = []

    def add(self, text: str, entity: bool = False) -> None:
        if entity:
            self.spans.append((self.length, self.length + len(text)))
        self.parts.append(text)
        self.length += len(text)

    def at_sentence_start(self) -> bool:
        stripped = "".join(self.parts).rstrip()
        return not stripped or stripped.endswith((".", "!", "?"))

    def text(self) -> str:
        return "".join(self.parts)


def _fill_template(
    builder: _ParagraphBuilder,
    template: str,
    rng: random.Random,
    names: list[str],
    decoys: list[str],
) -> None:
    for piece_no, piece in enumerate(template.split("{")):
        if piece_no == 0:
            builder.add(piece)
            continue
        slot, rest = piece.split("}", 1)
        if slot in ("drug", "drug2"):
            name = rng.choice(names)
            if builder.at_sentence_start():
                name = name[0].upper() + name[1:]
            builder.add(name, entity=True)
        elif slot == "gene":
            builder.add(rng.choice(_GENES))
        elif slot == "reagent":
            builder.add(rng.choice(_REAGENTS))
        elif slot == "virus":
            builder.add(rng.choice(_VIRUSES))
        elif slot == "method":
            builder.add(rng.choice(_METHODS))
        elif slot == "surname":
            surname = rng.choice(decoys).split()[0]
            builder.add(surname[0].upper() + surname[1:])
        elif slot == "topic":
            builder.add(rng.choice(_TOPICS))
        elif slot == "cohort":
            builder.add(rng.choice(_COHORTS))
        elif slot == "num":
            builder.add(str(rng.choice([1, 2, 3, 5, 7, 10, 14, 50, 100, 200, 300, 500])))
        elif slot == "num2":
            builder.add(str(rng.randint(2, 30)))
        else:
            raise ValueError(f"unknown template slot {slot!r}")
        builder.add(rest)


def generate(
    n_paragraphs: int = 5000,
    n_lexicon_terms: int = 300,
    n_extra_terms: int = 150,
    seed: int = 7,
    paragraphs_per_doc: int = 4,
    drug_paragraph_rate: float = 0.55,
) -> SyntheticCorpus:
    """Generate a corpus with planted entities and a partial gazetteer.

    The gazetteer holds ``n_lexicon_terms`` of the true vocabulary; the
    remaining ``n_extra_terms`` names appear in text (and in the full
    reference list) but not in the gazetteer.
    """
    rng = random.Random(seed)
    all_names = _make_names(rng, n_lexicon_terms + n_extra_terms + 60)
    names = all_names[: n_lexicon_terms + n_extra_terms]
    decoys = [n for n in all_names[n_lexicon_terms + n_extra_terms :] if "-" not in n]
    lexicon_names = names[:n_lexicon_terms]

    lexicon = Lexicon()
    for i, name in enumerate(lexicon_names):
        lexicon.add(name, code=f"S{i:04d}")
    reference = Lexicon()
    for i, name in enumerate(names):
        reference.add(name, code=f"S{i:04d}")

    documents: list[tuple[str, list[str]]] = []
    truth: dict[tuple[str, int], list[tuple[int, int]]] = {}
    doc_paras: list[str] = []
    doc_index = 0

    for p in range(n_paragraphs):
        builder = _ParagraphBuilder()
        n_sentences = rng.randint(1, 3)
        has_drug = rng.random() < drug_paragraph_rate
        drug_slot = rng.randrange(n_sentences) if has_drug else -1
        for s in range(n_sentences):
            if s > 0:
                builder.add(" ")
            if s == drug_slot:
                template = rng.choice(_DRUG_TEMPLATES)
            elif rng.random() < 0.35:
                template = rng.choice(_AMBIGUOUS_TEMPLATES)
            else:
                template = rng.choice(_NEUTRAL_TEMPLATES)
            _fill_template(builder, template, rng, names, decoys)
        para_index = len(doc_paras)
        doc_id = f"doc{doc_index:05d}"
        doc_paras.append(builder.text())
        if builder.spans:
            truth[(doc_id, para_index)] = builder.spans
        if len(doc_paras) == paragraphs_per_doc or p == n_paragraphs - 1:
            documents.append((doc_id, doc_paras))
            doc_paras = []
            doc_index += 1

    return SyntheticCorpus(
        documents=documents, lexicon=lexicon, reference=reference, truth=truth, seed=seed
    )


def labeled_with_truth(corpus: SyntheticCorpus, paragraph: Paragraph) -> LabeledParagraph:
    """Gold-labeled paragraph straight from the truth oracle (no noise)."""
    tokens = tokenize(paragraph.text)
    lp = LabeledParagraph(
        paragraph=paragraph, tokens=tokens, spans=[], provenance=Provenance.GOLD
    )
    spans = corpus.truth_spans(lp)
    return make_labeled(paragraph, spans, Provenance.GOLD, tokens=tokens)
