import random

import pytest

from modules.drug_lexicon import (
    LexiconEntry,
    build_trie,
    find_mentions,
    load_lexicon_tsv,
    normalize_surface,
    oracle_find_mentions,
)
from modules.schema import ConfigError, EmptyLexicon, EmptySurface, slice_bytes


def test_normalize_surface():
    assert normalize_surface("  Cis\tPlatin \n") == "cis platin"
    assert normalize_surface("5-FU") == "5-fu"


def test_build_trie_errors():
    with pytest.raises(EmptyLexicon):
        build_trie([])
    with pytest.raises(EmptySurface):
        build_trie([LexiconEntry("C1", "cisplatin", ("   ",))])


def test_smallest_concept_id_wins():
    trie = build_trie([LexiconEntry("C9", "taxol"), LexiconEntry("C2", "paclitaxel", ("Taxol",))])
    assert trie.lookup("TAXOL") == "C2"
    assert len(trie) == 2
    assert "Paclitaxel" in trie


def test_find_mentions_offsets_and_concepts():
    trie = build_trie([LexiconEntry("C376", "cisplatin", ("CDDP",))])
    text = "Patients on CDDP and Cisplatin recovered."
    mentions = find_mentions(text, trie)
    assert [(m.start, m.end, m.surface, m.concept_id) for m in mentions] == [
        (12, 16, "CDDP", "C376"),
        (21, 30, "Cisplatin", "C376"),
    ]


def test_leftmost_longest():
    trie = build_trie([LexiconEntry("C1", "fluorouracil"), LexiconEntry("C2", "5-fluorouracil")])
    mentions = find_mentions("given 5-fluorouracil daily", trie)
    assert [(m.surface, m.concept_id) for m in mentions] == [("5-fluorouracil", "C2")]


def test_word_boundaries():
    trie = build_trie([LexiconEntry("C642", "methotrexate", ("MTX",))])
    assert find_mentions("MTXA and preMTX", trie) == []
    assert [m.surface for m in find_mentions("(MTX)", trie)] == ["MTX"]


def test_whitespace_runs_match():
    trie = build_trie([LexiconEntry("C1", "all trans retinoic acid")])
    text = "on all  trans\nretinoic acid."
    (mention,) = find_mentions(text, trie)
    assert mention.surface == "all  trans\nretinoic acid"


def test_byte_offsets_with_non_ascii():
    trie = build_trie([LexiconEntry("C376", "cisplatin")])
    text = "Patient (età 60) received cisplatin."
    (mention,) = find_mentions(text, trie)
    assert mention.start == text.index("cisplatin") + 1
    assert slice_bytes(text, mention.start, mention.end) == "cisplatin"


def test_empty_text():
    trie = build_trie([LexiconEntry("C1", "cisplatin")])
    assert find_mentions("", trie) == []


# -----------------------
# Lexicon files
# -----------------------
def test_load_sample_lexicon(lexicon_entries):
    assert len(lexicon_entries) == 20
    first = lexicon_entries[0]
    assert first.concept_id == "C376"
    assert first.synonyms == ("CDDP", "cis-diamminedichloroplatinum")


def test_load_lexicon_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_lexicon_tsv(str(tmp_path / "missing.tsv"))
    path = tmp_path / "dup.tsv"
    path.write_text("C1\tcisplatin\nC1\tcarboplatin\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_lexicon_tsv(str(path))


def test_load_lexicon_dedupes_synonyms(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("# header\n\nC1\tCisplatin\tcisplatin|CDDP| cddp \n", encoding="utf-8")
    (entry,) = load_lexicon_tsv(str(path))
    assert entry.synonyms == ("CDDP",)


# -----------------------
# Property: trie == brute-force oracle
# -----------------------
WORDS = ["ab", "abc", "b", "bc", "c ab", "x", "é", "abé"]
SEPARATORS = [" ", "  ", ",", "-", "\n", "", "."]


def test_trie_matches_oracle_randomized():
    rng = random.Random(1234)
    for case in range(1000):
        n_entries = rng.randint(1, 4)
        entries = [
            LexiconEntry(f"C{i}", rng.choice(WORDS), tuple(rng.sample(WORDS, rng.randint(0, 2))))
            for i in range(n_entries)
        ]
        text = "".join(rng.choice(WORDS) + rng.choice(SEPARATORS) for _ in range(rng.randint(0, 8)))
        expected = oracle_find_mentions(text, entries)
        assert find_mentions(text, build_trie(entries)) == expected, (case, text, entries)
        for mention in expected:
            assert mention.is_valid_in(text)


SYLLABLES = ["ba", "ci", "do", "Fu", "li", "MAX", "ol", "pra", "ß", "té", "xy", "5-"]


def _generated_lexicon(rng, size=50):
    entries = []
    for i in range(size):
        names = [
            (" " * rng.randint(1, 2)).join(
                "".join(rng.choice(SYLLABLES) for _ in range(rng.randint(1, 3)))
                for _ in range(rng.randint(1, 2))
            )
            for _ in range(rng.randint(1, 3))
        ]
        entries.append(LexiconEntry(f"C{rng.randint(0, 99):02d}-{i}", names[0], tuple(names[1:])))
    return entries


def test_trie_matches_oracle_on_generated_lexicons():
    rng = random.Random(2024)
    for case in range(200):
        entries = _generated_lexicon(rng)
        surfaces = [s for e in entries for s in (e.preferred_name, *e.synonyms)]
        pieces = []
        for _ in range(rng.randint(0, 12)):
            piece = rng.choice(surfaces) if rng.random() < 0.6 else rng.choice(SYLLABLES)
            pieces.append(piece.upper() if rng.random() < 0.2 else piece)
            pieces.append(rng.choice(SEPARATORS))
        text = "".join(pieces)
        expected = oracle_find_mentions(text, entries)
        assert find_mentions(text, build_trie(entries)) == expected, (case, text)
        for mention in expected:
            assert mention.is_valid_in(text)


def test_matching_ignores_case(trie, small_corpus):
    texts = [s.text for s in small_corpus.sentences] + ["CDDP and Mtx, then 5-fu."]
    for text in texts:
        lower = find_mentions(text, trie)
        upper = find_mentions(text.upper(), trie)
        assert [(m.start, m.end, m.concept_id) for m in upper] == [(m.start, m.end, m.concept_id) for m in lower]
        assert [m.surface.casefold() for m in upper] == [m.surface.casefold() for m in lower]


def test_every_surface_found_is_a_lexicon_member(lexicon_entries, trie, small_corpus):
    members = {normalize_surface(s) for e in lexicon_entries for s in (e.preferred_name, *e.synonyms)}
    found = [m for s in small_corpus.sentences for m in find_mentions(s.text, trie)]
    assert found
    for mention in found:
        assert normalize_surface(mention.surface) in members
        assert trie.lookup(mention.surface) == mention.concept_id
