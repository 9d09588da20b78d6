"""
Drug Lexicon
Compiles drug names, synonyms and abbreviations into an Aho-Corasick trie
and finds drug mentions in plain text (leftmost-longest, word-bounded,
case-insensitive).
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import ahocorasick

from modules.schema import ConfigError, EmptyLexicon, EmptySurface, Mention, OffsetMap

logger = logging.getLogger(__name__)

_WHITESPACE_RUN = re.compile(r"\s+")


def normalize_surface(surface: str) -> str:
    """Casefold, collapse internal whitespace runs to one space, strip the ends"""
    return _WHITESPACE_RUN.sub(" ", surface.casefold()).strip()


@dataclass(frozen=True)
class LexiconEntry:
    concept_id: str
    preferred_name: str
    synonyms: tuple = field(default_factory=tuple)

    def surfaces(self) -> List[str]:
        """Normalized surfaces of this entry, preferred name first, deduplicated"""
        seen = []
        for surface in (self.preferred_name, *self.synonyms):
            norm = normalize_surface(surface)
            if norm not in seen:
                seen.append(norm)
        return seen


class DrugTrie:
    """
    Immutable compiled lexicon. Maps normalized surfaces to concept ids.

    Built once by build_trie(); afterwards only read, so a single instance
    can be shared between worker threads.
    """

    def __init__(self, surface_to_concept: dict):
        self._surface_to_concept = dict(surface_to_concept)
        self._automaton = ahocorasick.Automaton()
        for surface, concept_id in self._surface_to_concept.items():
            self._automaton.add_word(surface, (surface, concept_id))
        self._automaton.make_automaton()

    def lookup(self, surface: str) -> Optional[str]:
        return self._surface_to_concept.get(normalize_surface(surface))

    def surfaces(self) -> List[str]:
        return sorted(self._surface_to_concept)

    def __len__(self) -> int:
        return len(self._surface_to_concept)

    def __contains__(self, surface: str) -> bool:
        return self.lookup(surface) is not None

    def iter_matches(self, normalized_text: str):
        """Yield (start, end, concept_id) for every occurrence in normalized text"""
        for end_index, (surface, concept_id) in self._automaton.iter(normalized_text):
            yield end_index - len(surface) + 1, end_index + 1, concept_id


# -----------------------
# Build
# -----------------------
def build_trie(entries: Iterable[LexiconEntry]) -> DrugTrie:
    """
    Compile lexicon entries into a DrugTrie.

    When two entries share a normalized surface the lexicographically
    smallest concept_id wins.

    Raises:
        EmptyLexicon: no entries given
        EmptySurface: an entry has a surface that normalizes to ""
    """
    entries = list(entries)
    if not entries:
        raise EmptyLexicon("lexicon has no entries")

    surface_to_concept = {}
    for entry in entries:
        for surface in (entry.preferred_name, *entry.synonyms):
            norm = normalize_surface(surface)
            if not norm:
                raise EmptySurface(f"entry {entry.concept_id!r} has an empty surface")
            current = surface_to_concept.get(norm)
            if current is None or entry.concept_id < current:
                surface_to_concept[norm] = entry.concept_id

    logger.info("Built drug trie with %d surfaces from %d entries", len(surface_to_concept), len(entries))
    return DrugTrie(surface_to_concept)


def load_lexicon_tsv(path: str) -> List[LexiconEntry]:
    """
    Load a lexicon TSV: concept_id <TAB> preferred_name <TAB> synonym|synonym|...

    Blank lines and lines starting with '#' are skipped.
    """
    if not os.path.exists(path):
        raise ConfigError(f"lexicon file not found: {path}")

    entries = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ConfigError(f"{path}:{line_no}: expected at least 2 tab-separated columns")
            concept_id, preferred = parts[0].strip(), parts[1].strip()
            if not preferred:
                raise ConfigError(f"{path}:{line_no}: empty preferred_name")
            if concept_id in seen_ids:
                raise ConfigError(f"{path}:{line_no}: duplicate concept_id {concept_id!r}")
            seen_ids.add(concept_id)

            synonyms = []
            seen_norm = {normalize_surface(preferred)}
            raw_synonyms = parts[2].split("|") if len(parts) > 2 else []
            for synonym in raw_synonyms:
                norm = normalize_surface(synonym)
                if norm and norm not in seen_norm:
                    seen_norm.add(norm)
                    synonyms.append(synonym.strip())
            entries.append(LexiconEntry(concept_id, preferred, tuple(synonyms)))
    return entries


# -----------------------
# Matching
# -----------------------
def _normalize_with_map(text: str):
    """
    Normalize text the way surfaces are normalized, remembering for every
    normalized character which source characters produced it.

    Returns:
        (normalized, src_start, src_end, first, last) where first/last mark
        the edges of each source character's expansion
    """
    chars, src_start, src_end, first, last = [], [], [], [], []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            j = i
            while j < n and text[j].isspace():
                j += 1
            chars.append(" ")
            src_start.append(i)
            src_end.append(j)
            first.append(True)
            last.append(True)
            i = j
            continue
        folded = c.casefold()
        for k, fc in enumerate(folded):
            chars.append(fc)
            src_start.append(i)
            src_end.append(i + 1)
            first.append(k == 0)
            last.append(k == len(folded) - 1)
        i += 1
    return "".join(chars), src_start, src_end, first, last


def _is_word_bounded(text: str, start: int, end: int) -> bool:
    if start > 0 and text[start - 1].isalnum():
        return False
    if end < len(text) and text[end].isalnum():
        return False
    return True


def _select_leftmost_longest(candidates):
    """Greedy leftmost-longest selection of non-overlapping (start, end, concept) spans"""
    selected = []
    last_end = -1
    for start, end, concept_id in sorted(candidates, key=lambda c: (c[0], -c[1], c[2])):
        if start >= last_end:
            selected.append((start, end, concept_id))
            last_end = end
    return selected


def _to_mentions(text: str, spans) -> List[Mention]:
    offsets = OffsetMap(text)
    return [
        Mention(offsets.to_byte(s), offsets.to_byte(e), text[s:e], concept_id)
        for s, e, concept_id in spans
    ]


def find_mentions(text: str, trie: DrugTrie) -> List[Mention]:
    """
    Find drug mentions in text.

    Args:
        text: Plain text
        trie: Compiled lexicon

    Returns:
        Non-overlapping mentions sorted by start (byte offsets), each carrying
        its concept_id
    """
    if not text:
        return []

    normalized, src_start, src_end, first, last = _normalize_with_map(text)
    candidates = []
    for ns, ne, concept_id in trie.iter_matches(normalized):
        if not (first[ns] and last[ne - 1]):
            continue
        start, end = src_start[ns], src_end[ne - 1]
        if _is_word_bounded(text, start, end):
            candidates.append((start, end, concept_id))

    return _to_mentions(text, _select_leftmost_longest(candidates))


def oracle_find_mentions(text: str, entries: Iterable[LexiconEntry]) -> List[Mention]:
    """
    Brute-force reference for find_mentions, sharing none of its helpers.

    Walks the text one character at a time. At every word-bounded start it
    tries every word-bounded end from the longest down, normalizes that
    slice on its own (casefold, split on whitespace, rejoin with one space)
    and takes the first slice that is a lexicon surface, then resumes
    after it.
    """
    def fold(s: str) -> str:
        return " ".join(s.casefold().split())

    table = {}
    for entry in entries:
        for surface in (entry.preferred_name, *entry.synonyms):
            key = fold(surface)
            if key and (key not in table or entry.concept_id < table[key]):
                table[key] = entry.concept_id

    mentions = []
    n = len(text)
    pos = 0
    while pos < n:
        left_ok = pos == 0 or not text[pos - 1].isalnum()
        found = None
        if left_ok and not text[pos].isspace():
            for end in range(n, pos, -1):
                if text[end - 1].isspace() or (end < n and text[end].isalnum()):
                    continue
                concept_id = table.get(fold(text[pos:end]))
                if concept_id is not None:
                    found = (end, concept_id)
                    break
        if found is None:
            pos += 1
            continue
        end, concept_id = found
        byte_start = len(text[:pos].encode("utf-8"))
        byte_end = byte_start + len(text[pos:end].encode("utf-8"))
        mentions.append(Mention(byte_start, byte_end, text[pos:end], concept_id))
        pos = end
    return mentions
