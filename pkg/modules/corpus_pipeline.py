"""
Corpus Pipeline
Ingests abstracts, splits them into sentences, keeps the drug-bearing ones
and subsamples the distillation pool.

The source corpus is a PubMed export obtained with the query

    "adverse effects"[sh] AND (hasabstract[text] AND Case Reports[ptyp])
    AND "drug therapy"[sh] AND English[lang] AND (Case Reports[ptyp])

stored as JSONL, one {"doc_id", "text"} object per line.
"""

from __future__ import annotations

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

from modules.artifacts import read_jsonl, write_jsonl
from modules.drug_lexicon import DrugTrie, find_mentions
from modules.schema import ConfigError, Document, EmptyDocument, OffsetMap, Sentence

logger = logging.getLogger(__name__)

# Tokens that end in a period without ending the sentence
ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "approx.", "ca.",
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
    "fig.", "figs.", "no.", "vol.", "ref.", "eq.",
    "i.v.", "i.m.", "i.p.", "s.c.", "p.o.", "q.d.", "b.i.d.", "t.i.d.", "q.i.d.", "p.r.n.",
    "mg.", "min.", "max.", "hr.", "hrs.", "wk.", "wks.", "yr.", "yrs.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
})

# terminal punctuation, optional closing quotes/brackets, then whitespace or end of text
_BOUNDARY = re.compile(r"[.!?]+[\"')\]]*(?=\s|$)")


@dataclass
class CurationStats:
    docs: int = 0
    sentences: int = 0
    kept: int = 0

    def __add__(self, other: "CurationStats") -> "CurationStats":
        return CurationStats(self.docs + other.docs, self.sentences + other.sentences, self.kept + other.kept)


# -----------------------
# Ingestion
# -----------------------
def load_documents(path: str) -> List[Document]:
    """Load documents JSONL; duplicate doc_ids are an error, blank texts are skipped"""
    documents = []
    seen = set()
    for record in read_jsonl(path):
        doc = Document.from_dict(record)
        if doc.doc_id in seen:
            raise ConfigError(f"duplicate doc_id {doc.doc_id!r} in {path}")
        seen.add(doc.doc_id)
        if not doc.text.strip():
            logger.warning("Skipping document %s with empty text", doc.doc_id)
            continue
        documents.append(doc)
    return documents


# -----------------------
# Sentence splitting
# -----------------------
def _is_abbreviation(text: str, punct_start: int) -> bool:
    if text[punct_start] != ".":
        return False
    word_start = punct_start
    while word_start > 0 and not text[word_start - 1].isspace():
        word_start -= 1
    token = text[word_start:punct_start + 1].lower().lstrip("(\"'[")
    return token in ABBREVIATIONS


def _is_boundary(text: str, match: re.Match) -> bool:
    start, end = match.start(), match.end()
    if _is_abbreviation(text, start):
        return False
    # decimal guard ("2.5"), also covers a stray space-free number run
    if text[start] == "." and start > 0 and text[start - 1].isdigit() and end < len(text) and text[end].isdigit():
        return False
    # the next sentence must not continue in lowercase
    rest = text[end:].lstrip()
    if rest and rest[0].islower():
        return False
    return True


def split_sentences(doc: Document) -> List[Sentence]:
    """
    Split a document into sentences with a deterministic rule-based splitter.

    A run of . ! or ? (plus closing quotes or brackets) followed by whitespace
    or the end of text ends a sentence, except when:
      - the period closes a known abbreviation ("e.g.", "i.v.", "Dr.")
      - the period sits between two digits ("2.5")
      - the next non-space character is lowercase ("Was it? yes it was."),
        which joins the two pieces into one sentence

    Args:
        doc: Document with non-empty text

    Returns:
        Sentences in order; whitespace between sentences is not part of any
        sentence and can be recovered from each sentence's doc_start

    Raises:
        EmptyDocument: doc.text is empty or whitespace only
    """
    text = doc.text
    if not text or not text.strip():
        raise EmptyDocument(f"document {doc.doc_id!r} has no text")

    cut_points = [m.end() for m in _BOUNDARY.finditer(text) if _is_boundary(text, m)]
    if not cut_points or cut_points[-1] != len(text):
        cut_points.append(len(text))

    offsets = OffsetMap(text)
    sentences = []
    begin = 0
    for cut in cut_points:
        segment = text[begin:cut]
        stripped = segment.strip()
        if stripped:
            lead = len(segment) - len(segment.lstrip())
            sentences.append(Sentence(
                doc_id=doc.doc_id,
                sent_index=len(sentences),
                text=stripped,
                doc_start=offsets.to_byte(begin + lead),
            ))
        begin = cut
    return sentences


# -----------------------
# Filtering and sampling
# -----------------------
def filter_drug_sentences(sents: Sequence[Sentence], trie: DrugTrie) -> List[Sentence]:
    """Keep sentences with at least one lexicon drug mention, mentions attached"""
    kept = []
    for sent in sents:
        mentions = find_mentions(sent.text, trie)
        if mentions:
            kept.append(replace(sent, drug_mentions=mentions))
    return kept


def subsample(sents: Sequence, n: int, seed: int) -> list:
    """
    Draw min(n, len(sents)) items without replacement by a seeded partial
    Fisher-Yates shuffle.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    items = list(sents)
    k = min(n, len(items))
    rng = random.Random(seed)
    for i in range(k):
        j = rng.randrange(i, len(items))
        items[i], items[j] = items[j], items[i]
    return items[:k]


def _curate_one(doc: Document, trie: DrugTrie) -> Tuple[List[Sentence], CurationStats]:
    sentences = split_sentences(doc)
    kept = filter_drug_sentences(sentences, trie)
    return kept, CurationStats(docs=1, sentences=len(sentences), kept=len(kept))


def curate(docs: Sequence[Document], trie: DrugTrie, max_workers: int = 4) -> Tuple[List[Sentence], CurationStats]:
    """
    Split and filter every document, in parallel over documents, merging the
    results in input order.
    """
    total = CurationStats()
    kept_all = []
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for kept, stats in pool.map(lambda d: _curate_one(d, trie), docs):
            kept_all.extend(kept)
            total = total + stats
    return kept_all, total


def write_sentences(path: str, sents: Sequence[Sentence]) -> int:
    return write_jsonl(path, (s.to_dict() for s in sents))


def read_sentences(path: str) -> List[Sentence]:
    return [Sentence.from_dict(r) for r in read_jsonl(path)]
