"""
Synthetic ADE corpus generator.

Builds case-report style documents from a closed vocabulary (lexicon drugs,
a fixed adverse-event inventory, distractor conditions and filler sentences)
together with gold annotations grounded exactly like teacher answers.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field

from modules.corpus_pipeline import filter_drug_sentences, split_sentences
from modules.drug_lexicon import DrugTrie, LexiconEntry, build_trie, find_mentions
from modules.schema import AdeAnnotation, Document, Provenance, Sentence
from modules.teacher import ground_spans

logger = logging.getLogger(__name__)

# no phrase is a substring of another phrase or of any template text
AE_INVENTORY = (
    "neutropenia", "thrombocytopenia", "severe nausea", "peripheral neuropathy",
    "acute kidney injury", "hepatotoxicity", "mucositis", "skin rash",
    "interstitial pneumonitis", "cardiomyopathy", "ototoxicity", "alopecia",
    "diarrhea", "fatigue", "hypomagnesemia", "anaphylaxis", "hemorrhagic cystitis",
    "pancreatitis", "seizures", "hyperglycemia", "bradycardia", "lactic acidosis",
    "hand-foot syndrome", "pulmonary fibrosis",
)

CONDITIONS = (
    "type 2 diabetes", "chronic hypertension", "breast cancer", "colorectal carcinoma",
    "osteoarthritis", "ovarian cancer", "gastric adenocarcinoma", "hodgkin lymphoma",
)

EVENT_CLAUSES = (
    "{drug} caused {events}",
    "treatment with {drug} led to {events}",
    "{events} developed after {drug} therapy",
    "the patient given {drug} presented with {events}",
    "{drug} induced {events}",
    "{events} occurred during {drug} infusion",
)

QUIET_CLAUSES = (
    "{drug} was well tolerated",
    "{drug} was continued at the same dose",
    "no complications were attributed to {drug}",
)

DISTRACTOR_CLAUSES = (
    "the patient had a history of {condition}",
    "she was being followed for {condition}",
    "he was referred with {condition}",
)

FILLER_SENTENCES = (
    "The patient was admitted for further evaluation.",
    "Laboratory values were otherwise unremarkable.",
    "Informed consent was obtained for publication.",
    "Follow-up imaging showed stable disease.",
    "We describe the clinical course in detail.",
    "Supportive care was provided throughout the admission.",
)


class SynthConfig(BaseModel):
    n_sentences: int = Field(2000, ge=0)
    max_drugs: int = Field(3, ge=1, le=3)
    max_events: int = Field(3, ge=0, le=3)
    quiet_rate: float = Field(0.2, ge=0.0, le=1.0)
    distractor_rate: float = Field(0.3, ge=0.0, le=1.0)
    repeat_rate: float = Field(0.1, ge=0.0, le=1.0)
    filler_rate: float = Field(0.3, ge=0.0, le=1.0)
    sentences_per_doc: int = Field(4, ge=1)


@dataclass
class SynthCorpus:
    documents: List[Document] = field(default_factory=list)
    sentences: List[Sentence] = field(default_factory=list)
    gold: List[AdeAnnotation] = field(default_factory=list)


def _join_events(events: Sequence[str]) -> str:
    if len(events) == 1:
        return events[0]
    return ", ".join(events[:-1]) + " and " + events[-1]


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def _usable_surfaces(entries: Sequence[LexiconEntry], trie: DrugTrie) -> List[List[str]]:
    """Per concept, the surfaces that match as exactly one whole-surface mention"""
    per_concept = []
    for entry in entries:
        surfaces = []
        for surface in (entry.preferred_name, *entry.synonyms):
            mentions = find_mentions(surface, trie)
            if len(mentions) == 1 and mentions[0].span() == (0, len(surface.encode("utf-8"))):
                surfaces.append(surface)
        if surfaces:
            per_concept.append(surfaces)
    return per_concept


def _drug_sentence(rng: random.Random, concepts: List[List[str]], config: SynthConfig) -> Tuple[str, Dict[str, List[str]]]:
    """One sentence and its intended {drug surface: [event phrases]} answer"""
    n_drugs = rng.randint(1, min(config.max_drugs, len(concepts)))
    drugs = [rng.choice(surfaces) for surfaces in rng.sample(concepts, n_drugs)]
    inventory = list(AE_INVENTORY)
    rng.shuffle(inventory)

    clauses, parsed = [], {}
    for drug in drugs:
        n_events = 0 if rng.random() < config.quiet_rate else rng.randint(1, max(1, config.max_events))
        n_events = min(n_events, config.max_events, len(inventory))
        if n_events == 0:
            clauses.append(rng.choice(QUIET_CLAUSES).format(drug=drug))
            continue
        events = [inventory.pop() for _ in range(n_events)]
        clauses.append(rng.choice(EVENT_CLAUSES).format(drug=drug, events=_join_events(events)))
        parsed[drug] = events

    if parsed and rng.random() < config.repeat_rate:
        clauses.append(rng.choice(QUIET_CLAUSES).format(drug=rng.choice(list(parsed))))
    if rng.random() < config.distractor_rate:
        clauses.insert(rng.randint(0, len(clauses)), rng.choice(DISTRACTOR_CLAUSES).format(condition=rng.choice(CONDITIONS)))

    if len(clauses) == 1:
        body = clauses[0]
    else:
        body = ", ".join(clauses[:-1]) + ", while " + clauses[-1]
    return _capitalize(body) + ".", parsed


def generate(entries: Sequence[LexiconEntry], config: Optional[SynthConfig] = None, seed: int = 1,
             id_prefix: str = "synth") -> SynthCorpus:
    """
    Generate documents, their drug sentences and gold annotations.

    Args:
        entries: Lexicon entries supplying the drug surfaces
        config: Size and composition knobs
        seed: Generator seed
        id_prefix: Prefix of the generated doc_ids

    Returns:
        SynthCorpus whose sentences are exactly what curation would produce
        from its documents, with gold keyed on those sentences
    """
    config = config or SynthConfig()
    corpus = SynthCorpus()
    if config.n_sentences == 0:
        return corpus

    trie = build_trie(entries)
    concepts = _usable_surfaces(entries, trie)
    rng = random.Random(seed)

    produced = 0
    doc_index = 0
    while produced < config.n_sentences:
        planned: List[Tuple[str, Optional[Dict[str, List[str]]]]] = []
        while len(planned) < config.sentences_per_doc and produced < config.n_sentences:
            if rng.random() < config.filler_rate:
                planned.append((rng.choice(FILLER_SENTENCES), None))
            else:
                planned.append(_drug_sentence(rng, concepts, config))
                produced += 1
        document = Document(f"{id_prefix}-{doc_index:06d}", " ".join(text for text, _ in planned))
        doc_index += 1
        corpus.documents.append(document)

        split = split_sentences(document)
        if [s.text for s in split] != [text for text, _ in planned]:
            raise AssertionError(f"sentence splitter disagrees with generated boundaries in {document.doc_id}")
        answers = {s.key: parsed for s, (_, parsed) in zip(split, planned)}
        for sentence in filter_drug_sentences(split, trie):
            corpus.sentences.append(sentence)
            annotations, _ = ground_spans(sentence, answers[sentence.key] or {}, Provenance.GOLD)
            corpus.gold.extend(annotations)

    logger.info("Generated %d documents, %d drug sentences, %d gold annotations",
                len(corpus.documents), len(corpus.sentences), len(corpus.gold))
    return corpus
