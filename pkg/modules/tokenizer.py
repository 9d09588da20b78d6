"""
Word-level tokenizer and vocabulary for the student model.
Lowercased words, punctuation kept as single-character tokens, UTF-8 byte
offsets retained so predictions map back onto the sentence.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Tuple

from modules.artifacts import atomic_write_text
from modules.schema import MissingArtifact, OffsetMap

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)

PAD, UNK = "[PAD]", "[UNK]"
# markers used by the pairwise relation classifier
EVENT_OPEN, EVENT_CLOSE, DRUG_OPEN, DRUG_CLOSE = "[E]", "[/E]", "[D]", "[/D]"
SPECIAL_TOKENS = (PAD, UNK, EVENT_OPEN, EVENT_CLOSE, DRUG_OPEN, DRUG_CLOSE)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def token_char_spans(text: str) -> List[Tuple[int, int]]:
    return [m.span() for m in _TOKEN.finditer(text)]


def tokenize(text: str) -> List[Token]:
    offsets = OffsetMap(text)
    return [
        Token(text[s:e].lower(), offsets.to_byte(s), offsets.to_byte(e))
        for s, e in token_char_spans(text)
    ]


class Vocabulary:
    """Token <-> id mapping; ids 0..5 are the special tokens"""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos = list(SPECIAL_TOKENS)
        for token in tokens:
            if token not in SPECIAL_TOKENS:
                self.itos.append(token)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]], min_count: int = 1) -> "Vocabulary":
        counts = Counter()
        for stream in token_streams:
            counts.update(stream)
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(kept)

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def unk_id(self) -> int:
        return self.stoi[UNK]

    def id_of(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of(t) for t in tokens]

    def save(self, path: str) -> None:
        atomic_write_text(path, json.dumps({"itos": self.itos}, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        try:
            with open(path, "r", encoding="utf-8") as f:
                itos = json.load(f)["itos"]
        except FileNotFoundError:
            raise MissingArtifact(f"vocabulary not found: {path}") from None
        vocab = cls()
        vocab.itos = list(itos)
        vocab.stoi = {t: i for i, t in enumerate(vocab.itos)}
        return vocab
