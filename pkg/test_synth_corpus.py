import hashlib

import pytest

from modules.artifacts import dumps_record
from modules.corpus_pipeline import curate
from modules.schema import Provenance, group_by_sentence, slice_bytes
from modules.synth_corpus import AE_INVENTORY, SynthConfig, generate


def test_empty_corpus(lexicon_entries):
    corpus = generate(lexicon_entries, SynthConfig(n_sentences=0))
    assert corpus.documents == [] and corpus.sentences == [] and corpus.gold == []


def test_generation_is_seeded(lexicon_entries):
    a = generate(lexicon_entries, SynthConfig(n_sentences=40), seed=3)
    b = generate(lexicon_entries, SynthConfig(n_sentences=40), seed=3)
    c = generate(lexicon_entries, SynthConfig(n_sentences=40), seed=4)
    assert [d.text for d in a.documents] == [d.text for d in b.documents]
    assert [g.to_dict() for g in a.gold] == [g.to_dict() for g in b.gold]
    assert [d.text for d in a.documents] != [d.text for d in c.documents]


def test_sentence_count_and_ids(small_corpus):
    assert len(small_corpus.sentences) == 120
    assert small_corpus.documents[0].doc_id == "synth-000000"
    assert all(s.drug_mentions for s in small_corpus.sentences)


def test_gold_spans_are_valid(small_corpus):
    texts = {s.key: s.text for s in small_corpus.sentences}
    assert small_corpus.gold
    for ann in small_corpus.gold:
        text = texts[ann.sentence_key]
        assert ann.provenance is Provenance.GOLD
        assert ann.drug.is_valid_in(text)
        assert ann.events
        for event in ann.events:
            assert event.is_valid_in(text)
            assert slice_bytes(text, event.start, event.end).lower() in AE_INVENTORY


def test_sentences_match_curation(small_corpus, trie):
    curated, stats = curate(small_corpus.documents, trie, max_workers=2)
    assert [s.to_dict() for s in curated] == [s.to_dict() for s in small_corpus.sentences]
    assert stats.docs == len(small_corpus.documents)
    assert set(group_by_sentence(small_corpus.gold)) <= {s.key for s in curated}


def test_composition_knobs(lexicon_entries):
    quiet = generate(lexicon_entries, SynthConfig(n_sentences=30, quiet_rate=1.0, filler_rate=0.0), seed=2)
    assert len(quiet.sentences) == 30
    assert quiet.gold == []
    single = generate(lexicon_entries, SynthConfig(n_sentences=30, max_drugs=1, max_events=1, quiet_rate=0.0,
                                                   repeat_rate=0.0), seed=2)
    assert all(len(ann.events) == 1 for ann in single.gold)
    assert len(single.gold) == 30


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(max_drugs=0)
    with pytest.raises(ValueError):
        SynthConfig(quiet_rate=1.5)


def test_reference_corpus_hash(lexicon_entries, golden):
    corpus = generate(lexicon_entries, SynthConfig(n_sentences=2000), seed=1)
    assert len(corpus.sentences) == 2000
    digest = hashlib.sha256()
    for record in [d.to_dict() for d in corpus.documents] + [g.to_dict() for g in corpus.gold]:
        digest.update((dumps_record(record) + "\n").encode("utf-8"))
    golden.check("synth_seed1_n2000.sha256", digest.hexdigest() + "\n")
