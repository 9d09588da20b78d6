"""
Teacher Annotation Pipeline
Prompt construction, response parsing, span grounding and positive
filtering for LLM-produced ADE annotations, plus a deterministic mock
teacher with injectable noise.
"""

from __future__ import annotations

import hashlib
import logging
import random
import re
from dataclasses import dataclass, fields
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from langchain_core.prompts import FewShotPromptTemplate, PromptTemplate
from pydantic import BaseModel, Field

from modules.drug_lexicon import normalize_surface
from modules.schema import (
    AdeAnnotation,
    EmptySentence,
    Mention,
    OffsetMap,
    Provenance,
    Sentence,
    TeacherResponse,
)
from modules.tokenizer import token_char_spans

logger = logging.getLogger(__name__)


# -----------------------
# Prompt Design
# -----------------------
class PromptMode(str, Enum):
    ZERO_SHOT = "zero"
    FEW_SHOT_5 = "few"


INSTRUCTION = "Extract the adverse events each drug causes in the Message. If no ADE is found, return None."

FEW_SHOT_EXAMPLES = [
    {
        "n": "1",
        "example_message": "We postulate that the bolus of sulprostone resulted in possible coronary spasm that resulted in cardiac arrest.",
        "example_annotations": "sulprostone: cardiac arrest|coronary spasm",
    },
    {
        "n": "2",
        "example_message": "In each of the three reported patients, alteration of eyelid appearance with deepening of the lid sulcus was evident as the result of topical bimatoprost therapy.",
        "example_annotations": "bimatoprost: alteration of eyelid appearance|deepening of the lid sulcus",
    },
    {
        "n": "3",
        "example_message": "Immobilization, while Paget's bone disease was present, and perhaps enhanced activation of dihydrotachysterol by rifampicin, could have led to increased calcium - release into the circulation.",
        "example_annotations": "dihydrotachysterol: increased calcium - release",
    },
    {
        "n": "4",
        "example_message": "In two patients clozapine was reinstated after risperidone was discontinued; serum triglyceride levels increased.",
        "example_annotations": "clozapine: serum triglyceride levels increased",
    },
    {
        "n": "5",
        "example_message": "The cause of these previously unreported side effects of niacin therapy is uncertain but may be related to prostaglandin - mediated vasodilatation, hyperalgesia of sensory nerve receptors, and potentiation of inflammation in the gingiva with referral of pain to the teeth.",
        "example_annotations": "niacin: hyperalgesia of sensory nerve receptors|pain to the teeth|potentiation of inflammation in the gingiva|prostaglandin - mediated vasodilatation",
    },
]

_ZERO_SHOT_TEMPLATE = PromptTemplate.from_template(INSTRUCTION + "\n\nMessage: {message}")

_FEW_SHOT_TEMPLATE = FewShotPromptTemplate(
    examples=FEW_SHOT_EXAMPLES,
    example_prompt=PromptTemplate.from_template(
        "Example {n}:\nMessage: {example_message}\nAnnotations: {example_annotations}"
    ),
    prefix=INSTRUCTION,
    suffix="Message: {message}",
    input_variables=["message"],
    example_separator="\n\n",
)


def build_prompt(sentence_text: str, mode: PromptMode) -> str:
    """
    Render the teacher prompt for one sentence.

    Args:
        sentence_text: The query sentence
        mode: Zero-shot or five-shot

    Raises:
        EmptySentence: sentence_text is empty
    """
    if not sentence_text:
        raise EmptySentence("cannot build a prompt for an empty sentence")
    template = _FEW_SHOT_TEMPLATE if PromptMode(mode) is PromptMode.FEW_SHOT_5 else _ZERO_SHOT_TEMPLATE
    return template.format(message=sentence_text)


# -----------------------
# Response Parsing
# -----------------------
@dataclass
class ParseDiagnostics:
    lines: int = 0
    parsed: int = 0
    malformed: int = 0


def parse_response(raw: str, diagnostics: Optional[ParseDiagnostics] = None) -> Dict[str, List[str]]:
    """
    Parse "drug: event|event" lines into {drug: [events]}.

    A raw answer of "None" (any case) is the empty map. Lines without a
    colon, with an empty drug or with no events are skipped and counted as
    malformed in diagnostics.
    """
    diagnostics = diagnostics if diagnostics is not None else ParseDiagnostics()
    parsed: Dict[str, List[str]] = {}
    if raw is None or raw.strip().casefold() in ("none", "none."):
        return parsed

    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        diagnostics.lines += 1
        if line.casefold().startswith("annotations:"):
            line = line[len("annotations:"):].strip()
        if line.casefold() in ("none", "none."):
            continue
        drug, sep, rest = line.partition(":")
        drug = drug.strip()
        events = [e.strip() for e in rest.split("|")] if sep else []
        events = [e for e in events if e]
        if not sep or not drug or not events:
            diagnostics.malformed += 1
            continue
        bucket = parsed.setdefault(drug, [])
        for event in events:
            if event not in bucket:
                bucket.append(event)
        diagnostics.parsed += 1
    return parsed


def format_annotations(parsed: Dict[str, List[str]]) -> str:
    """Render {drug: [events]} in the prompt's annotation line format"""
    lines = [f"{drug}: {'|'.join(events)}" for drug, events in parsed.items() if events]
    return "\n".join(lines) if lines else "None"


# -----------------------
# Post-Processing (span grounding)
# -----------------------
@dataclass
class GroundingStats:
    drugs_grounded: int = 0
    drugs_ungrounded: int = 0
    events_grounded: int = 0
    hallucinated: int = 0
    total_events: int = 0

    def __add__(self, other: "GroundingStats") -> "GroundingStats":
        return GroundingStats(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def drug_groups(sentence: Sentence) -> Dict[str, Mention]:
    """Normalized drug surface -> first mention of it in the sentence"""
    groups: Dict[str, Mention] = {}
    for mention in sentence.drug_mentions:
        groups.setdefault(normalize_surface(mention.surface), mention)
    return groups


def _event_pattern(event: str) -> re.Pattern:
    parts = [re.escape(p) for p in event.split()]
    return re.compile(r"\s+".join(parts), re.IGNORECASE)


def find_event_mentions(text: str, event: str, offsets: Optional[OffsetMap] = None) -> List[Mention]:
    """All non-overlapping case-insensitive occurrences of event in text"""
    if not event.strip():
        return []
    offsets = offsets or OffsetMap(text)
    return [
        Mention(offsets.to_byte(m.start()), offsets.to_byte(m.end()), m.group(0))
        for m in _event_pattern(event).finditer(text)
    ]


def ground_spans(sentence: Sentence, parsed: Dict[str, List[str]],
                 provenance: Provenance = Provenance.TEACHER) -> Tuple[List[AdeAnnotation], GroundingStats]:
    """
    Turn teacher strings into byte-offset mentions by string matching.

    A drug key is grounded when its normalized form equals a lexicon drug
    mention of the sentence; every event string becomes all its non-overlapping
    occurrences. Strings found nowhere are counted as hallucinations.

    Returns:
        (annotations for grounded drugs, grounding tallies)
    """
    stats = GroundingStats()
    groups = drug_groups(sentence)
    offsets = OffsetMap(sentence.text)
    by_drug: Dict[str, AdeAnnotation] = {}

    for drug_key, events in parsed.items():
        drug_mention = groups.get(normalize_surface(drug_key))
        if drug_mention is None:
            stats.drugs_ungrounded += 1
        else:
            stats.drugs_grounded += 1

        found: List[Mention] = []
        for event in events:
            stats.total_events += 1
            occurrences = find_event_mentions(sentence.text, event, offsets)
            if occurrences:
                stats.events_grounded += 1
                found.extend(occurrences)
            else:
                stats.hallucinated += 1

        if drug_mention is None:
            continue
        norm = normalize_surface(drug_mention.surface)
        if norm in by_drug:
            by_drug[norm] = AdeAnnotation(sentence.key, drug_mention, by_drug[norm].events + found, provenance)
        else:
            by_drug[norm] = AdeAnnotation(sentence.key, drug_mention, found, provenance)

    annotations = sorted(by_drug.values(), key=lambda a: a.drug.start)
    return annotations, stats


def filter_positive(annotated_sentences: Sequence[Tuple[Sentence, List[AdeAnnotation]]]):
    """Keep (sentence, annotations) pairs with at least one annotation carrying an event"""
    return [
        (sentence, annotations)
        for sentence, annotations in annotated_sentences
        if any(a.events for a in annotations)
    ]


# -----------------------
# Mock Teacher
# -----------------------
class NoiseConfig(BaseModel):
    drop_rate: float = Field(0.0, ge=0.0, le=1.0)
    spurious_rate: float = Field(0.0, ge=0.0, le=1.0)
    jitter_rate: float = Field(0.0, ge=0.0, le=1.0)
    seed: int = 0

    @classmethod
    def from_cli(cls, value: str) -> "NoiseConfig":
        """Parse "drop,spurious,jitter,seed" """
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 4:
            raise ValueError("noise must be 'drop,spurious,jitter,seed'")
        return cls(drop_rate=float(parts[0]), spurious_rate=float(parts[1]),
                   jitter_rate=float(parts[2]), seed=int(parts[3]))


def _sentence_rng(noise: NoiseConfig, sentence: Sentence) -> random.Random:
    digest = hashlib.sha256(f"{noise.seed}\x00{sentence.doc_id}\x00{sentence.sent_index}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


def _jitter(text: str, token_spans, start: int, end: int, rng: random.Random) -> Tuple[int, int]:
    """Grow or shrink a char span by one token on either side"""
    covered = [i for i, (s, e) in enumerate(token_spans) if s < end and start < e]
    if not covered:
        return start, end
    first, last = covered[0], covered[-1]
    moves = []
    if first > 0:
        moves.append((first - 1, last))
    if last < len(token_spans) - 1:
        moves.append((first, last + 1))
    if last > first:
        moves.append((first + 1, last))
        moves.append((first, last - 1))
    if not moves:
        return start, end
    a, b = rng.choice(moves)
    return token_spans[a][0], token_spans[b][1]


def _spurious_span(token_spans, blocked, text: str, rng: random.Random) -> Optional[Tuple[int, int]]:
    """Pick a run of 1-3 word tokens that touches no gold event or drug"""
    words = [i for i, (s, e) in enumerate(token_spans) if text[s:e].isalpha()]
    rng.shuffle(words)
    for i in words:
        length = rng.randint(1, 3)
        run = list(range(i, min(i + length, len(token_spans))))
        if not all(text[token_spans[j][0]:token_spans[j][1]].isalpha() for j in run):
            continue
        s, e = token_spans[run[0]][0], token_spans[run[-1]][1]
        if any(s < be and bs < e for bs, be in blocked):
            continue
        return s, e
    return None


def mock_teacher(sentence: Sentence, gold: Sequence[AdeAnnotation], noise: NoiseConfig) -> TeacherResponse:
    """
    Emit a prompt-format teacher answer derived from gold annotations.

    Each gold event string is dropped with probability drop_rate; each
    surviving one has its boundary moved by one token with probability
    jitter_rate; each drug gains a spurious span with probability
    spurious_rate. With all rates zero the answer grounds back to gold.
    """
    rng = _sentence_rng(noise, sentence)
    text = sentence.text
    offsets = OffsetMap(text)
    token_spans = token_char_spans(text)

    blocked = []
    for ann in gold:
        blocked.append((offsets.to_char(ann.drug.start), offsets.to_char(ann.drug.end)))
        for event in ann.events:
            blocked.append((offsets.to_char(event.start), offsets.to_char(event.end)))

    parsed: Dict[str, List[str]] = {}
    for ann in sorted(gold, key=lambda a: a.drug.start):
        events: List[str] = []
        seen = set()
        for event in ann.events:
            if event.surface.casefold() in seen:
                continue
            seen.add(event.surface.casefold())
            if rng.random() < noise.drop_rate:
                continue
            start, end = offsets.to_char(event.start), offsets.to_char(event.end)
            if rng.random() < noise.jitter_rate:
                start, end = _jitter(text, token_spans, start, end, rng)
            surface = text[start:end].strip()
            if surface and "|" not in surface and surface not in events:
                events.append(surface)
        if rng.random() < noise.spurious_rate:
            span = _spurious_span(token_spans, blocked, text, rng)
            if span is not None and text[span[0]:span[1]] not in events:
                events.append(text[span[0]:span[1]])
        if events:
            parsed.setdefault(ann.drug.surface, []).extend(events)

    raw = format_annotations(parsed)
    return TeacherResponse(sentence.key, raw, parse_response(raw))
