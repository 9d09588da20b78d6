"""
Shared Domain Types
Mentions, documents, sentences and ADE annotations, plus the error hierarchy
and the char <-> byte offset bookkeeping every module relies on.

All offsets stored on records are UTF-8 byte offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate
from typing import Optional, Tuple


SentenceKey = Tuple[str, int]


# -----------------------
# Errors
# -----------------------
class AdeError(Exception):
    """Base class for every error raised by the pipeline"""


class EmptyLexicon(AdeError):
    pass


class EmptySurface(AdeError):
    pass


class EmptyDocument(AdeError):
    pass


class EmptySentence(AdeError):
    pass


class AllRetriesExhausted(AdeError):
    def __init__(self, sentence_key: SentenceKey, last_error: str = ""):
        super().__init__(f"teacher failed for {sentence_key}: {last_error}")
        self.sentence_key = sentence_key
        self.last_error = last_error


class TokenOutOfVocab(AdeError):
    pass


class SequenceTooLong(AdeError):
    pass


class ShapeMismatch(AdeError):
    pass


class EmptyDrugSpan(AdeError):
    pass


class EmptyTrainingSet(AdeError):
    pass


class SentenceSetMismatch(AdeError):
    pass


class TooFewItems(AdeError):
    pass


class ConfigError(AdeError):
    pass


class MissingArtifact(AdeError):
    pass


# -----------------------
# Offsets
# -----------------------
class OffsetMap:
    """
    Maps character indices of a str to UTF-8 byte offsets and back.

    Args:
        text: The text whose offsets are being mapped
    """

    def __init__(self, text: str):
        self.text = text
        self._char_to_byte = [0] + list(accumulate(len(c.encode("utf-8")) for c in text))
        self._byte_to_char = {b: i for i, b in enumerate(self._char_to_byte)}

    def to_byte(self, char_index: int) -> int:
        return self._char_to_byte[char_index]

    def to_char(self, byte_offset: int) -> int:
        try:
            return self._byte_to_char[byte_offset]
        except KeyError:
            raise ValueError(f"byte offset {byte_offset} is not on a character boundary") from None

    @property
    def n_bytes(self) -> int:
        return self._char_to_byte[-1]


def slice_bytes(text: str, start: int, end: int) -> str:
    """Return text[start:end] where start/end are UTF-8 byte offsets"""
    return text.encode("utf-8")[start:end].decode("utf-8")


def byte_len(text: str) -> int:
    return len(text.encode("utf-8"))


# -----------------------
# Records
# -----------------------
@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    surface: str
    concept_id: Optional[str] = None

    def span(self) -> Tuple[int, int]:
        return (self.start, self.end)

    def overlaps(self, other: "Mention") -> bool:
        return self.start < other.end and other.start < self.end

    def to_dict(self) -> dict:
        record = {"start": self.start, "end": self.end, "surface": self.surface}
        if self.concept_id is not None:
            record["concept_id"] = self.concept_id
        return record

    @classmethod
    def from_dict(cls, record: dict) -> "Mention":
        return cls(
            start=int(record["start"]),
            end=int(record["end"]),
            surface=record["surface"],
            concept_id=record.get("concept_id"),
        )

    def is_valid_in(self, text: str) -> bool:
        n = byte_len(text)
        if not (0 <= self.start < self.end <= n):
            return False
        try:
            return slice_bytes(text, self.start, self.end) == self.surface
        except UnicodeDecodeError:
            return False


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "text": self.text}

    @classmethod
    def from_dict(cls, record: dict) -> "Document":
        return cls(doc_id=str(record["doc_id"]), text=record["text"])


@dataclass
class Sentence:
    doc_id: str
    sent_index: int
    text: str
    drug_mentions: list = field(default_factory=list)
    # byte offset of the sentence inside its document
    doc_start: int = 0

    @property
    def key(self) -> SentenceKey:
        return (self.doc_id, self.sent_index)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "sent_index": self.sent_index,
            "text": self.text,
            "doc_start": self.doc_start,
            "drug_mentions": [m.to_dict() for m in self.drug_mentions],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "Sentence":
        return cls(
            doc_id=str(record["doc_id"]),
            sent_index=int(record["sent_index"]),
            text=record["text"],
            drug_mentions=[Mention.from_dict(m) for m in record.get("drug_mentions", [])],
            doc_start=int(record.get("doc_start", 0)),
        )


class Provenance(str, Enum):
    TEACHER = "teacher"
    GOLD = "gold"
    MOCK = "mock"
    STUDENT = "student"


@dataclass
class AdeAnnotation:
    sentence_key: SentenceKey
    drug: Mention
    events: list
    provenance: Provenance = Provenance.TEACHER

    def __post_init__(self):
        # events are kept unique by span, in ascending order
        unique = {}
        for event in self.events:
            unique.setdefault(event.span(), event)
        self.events = [unique[span] for span in sorted(unique)]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.sentence_key[0],
            "sent_index": self.sentence_key[1],
            "drug": self.drug.to_dict(),
            "events": [e.to_dict() for e in self.events],
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "AdeAnnotation":
        return cls(
            sentence_key=(str(record["doc_id"]), int(record["sent_index"])),
            drug=Mention.from_dict(record["drug"]),
            events=[Mention.from_dict(e) for e in record.get("events", [])],
            provenance=Provenance(record.get("provenance", "teacher")),
        )


@dataclass
class TeacherResponse:
    sentence_key: SentenceKey
    raw: str
    parsed: dict

    def to_dict(self) -> dict:
        return {
            "doc_id": self.sentence_key[0],
            "sent_index": self.sentence_key[1],
            "raw": self.raw,
            "parsed": self.parsed,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "TeacherResponse":
        return cls(
            sentence_key=(str(record["doc_id"]), int(record["sent_index"])),
            raw=record["raw"],
            parsed={k: list(v) for k, v in record.get("parsed", {}).items()},
        )


def group_by_sentence(annotations) -> dict:
    """Group annotations into {sentence_key: [AdeAnnotation, ...]}"""
    grouped = {}
    for ann in annotations:
        grouped.setdefault(ann.sentence_key, []).append(ann)
    return grouped
