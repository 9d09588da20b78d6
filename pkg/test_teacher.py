import json
import os
import random

import pytest

from modules.drug_lexicon import find_mentions
from modules.evaluation import MatchMode, score
from modules.schema import AdeAnnotation, EmptySentence, Mention, Provenance, Sentence, slice_bytes
from modules.teacher import (
    NoiseConfig,
    ParseDiagnostics,
    PromptMode,
    build_prompt,
    filter_positive,
    format_annotations,
    ground_spans,
    mock_teacher,
    parse_response,
)

GOLDEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "golden")


def _golden(name: str) -> str:
    with open(os.path.join(GOLDEN, name), "r", encoding="utf-8", newline="") as f:
        return f.read()


def _sentence(text: str, trie) -> Sentence:
    return Sentence("doc", 0, text, find_mentions(text, trie))


# -----------------------
# Prompts
# -----------------------
def test_prompts_match_golden_files():
    sentence = _golden("prompt_sentence.txt")
    assert build_prompt(sentence, PromptMode.ZERO_SHOT) == _golden("prompt_zero_shot.txt")
    assert build_prompt(sentence, PromptMode.FEW_SHOT_5) == _golden("prompt_few_shot.txt")


def test_prompt_contents():
    zero = build_prompt("Aspirin caused rash.", "zero")
    assert zero.endswith("\n\nMessage: Aspirin caused rash.")
    assert "Example" not in zero
    few = build_prompt("Aspirin caused rash.", "few")
    assert few.count("Example ") == 5
    assert few.endswith("Annotations: niacin: hyperalgesia of sensory nerve receptors|pain to the teeth|"
                        "potentiation of inflammation in the gingiva|prostaglandin - mediated vasodilatation"
                        "\n\nMessage: Aspirin caused rash.")


def test_prompt_empty_sentence():
    with pytest.raises(EmptySentence):
        build_prompt("", PromptMode.ZERO_SHOT)


def test_prompt_keeps_braces():
    assert build_prompt("Dose {x} of MTX.", PromptMode.FEW_SHOT_5).endswith("Message: Dose {x} of MTX.")


# -----------------------
# Parsing
# -----------------------
def test_parse_none():
    assert parse_response("None") == {}
    assert parse_response("  none. ") == {}
    assert format_annotations({}) == "None"


def test_parse_lines():
    diagnostics = ParseDiagnostics()
    raw = "Annotations: cisplatin: nausea | vomiting\nbogus line\ncarboplatin:\ncisplatin: nausea|rash"
    parsed = parse_response(raw, diagnostics)
    assert parsed == {"cisplatin": ["nausea", "vomiting", "rash"]}
    assert (diagnostics.lines, diagnostics.parsed, diagnostics.malformed) == (4, 2, 2)


def test_format_parse_identity_randomized():
    rng = random.Random(5)
    words = ["alpha", "beta", "gamma", "delta", "fu", "5-FU", "rash", "severe nausea", "b12"]
    for _ in range(1000):
        parsed = {}
        for _ in range(rng.randint(0, 4)):
            drug = rng.choice(words)
            events = []
            for event in rng.sample(words, rng.randint(1, 4)):
                if event not in events:
                    events.append(event)
            parsed.setdefault(drug, events)
        assert parse_response(format_annotations(parsed)) == parsed


# -----------------------
# Grounding
# -----------------------
def test_ground_spans(trie):
    sentence = _sentence("Cisplatin caused severe nausea and neutropenia.", trie)
    parsed = {"cisplatin": ["severe  nausea", "Neutropenia", "alopecia"], "aspirin": ["rash"]}
    annotations, stats = ground_spans(sentence, parsed)
    (ann,) = annotations
    assert ann.drug.surface == "Cisplatin"
    assert [slice_bytes(sentence.text, e.start, e.end) for e in ann.events] == ["severe nausea", "neutropenia"]
    assert ann.provenance is Provenance.TEACHER
    assert stats.to_dict() == {
        "drugs_grounded": 1, "drugs_ungrounded": 1,
        "events_grounded": 2, "hallucinated": 2, "total_events": 4,
    }


def test_ground_spans_repeated_event_and_drug(trie):
    sentence = _sentence("MTX caused rash; later MTX caused rash again.", trie)
    annotations, _ = ground_spans(sentence, {"mtx": ["rash"]})
    (ann,) = annotations
    assert ann.drug.start == 0
    assert len(ann.events) == 2


def test_grounding_conservation_randomized(trie):
    rng = random.Random(17)
    sentence = _sentence("Cisplatin and MTX caused severe nausea, rash and fatigue in the patient.", trie)
    candidates = ["cisplatin", "MTX", "Taxol", "severe nausea", "rash", "fever", "fatigue", "the patient", "coma"]
    for _ in range(1000):
        parsed = {rng.choice(candidates): rng.sample(candidates, rng.randint(1, 3)) for _ in range(rng.randint(0, 3))}
        annotations, stats = ground_spans(sentence, parsed)
        assert stats.events_grounded + stats.hallucinated == stats.total_events
        assert stats.drugs_grounded + stats.drugs_ungrounded == len(parsed)
        for ann in annotations:
            assert all(e.is_valid_in(sentence.text) for e in ann.events)


def test_filter_positive():
    mention = Mention(0, 3, "MTX")
    s1, s2 = Sentence("d", 0, "MTX x"), Sentence("d", 1, "MTX y")
    pairs = [
        (s1, [AdeAnnotation(s1.key, mention, [])]),
        (s2, [AdeAnnotation(s2.key, mention, [Mention(4, 5, "y")])]),
    ]
    assert filter_positive(pairs) == [pairs[1]]


# -----------------------
# Mock teacher
# -----------------------
def _spans(annotations):
    return sorted((a.sentence_key, a.drug.span(), tuple(e.span() for e in a.events)) for a in annotations)


def test_mock_teacher_without_noise_grounds_to_gold(small_corpus):
    gold = {}
    for ann in small_corpus.gold:
        gold.setdefault(ann.sentence_key, []).append(ann)
    for sentence in small_corpus.sentences:
        expected = gold.get(sentence.key, [])
        response = mock_teacher(sentence, expected, NoiseConfig())
        annotations, stats = ground_spans(sentence, response.parsed)
        assert stats.hallucinated == 0
        assert _spans(annotations) == _spans(expected)


def test_mock_teacher_noise(small_corpus):
    sentence = small_corpus.sentences[0]
    gold = [a for a in small_corpus.gold if a.sentence_key == sentence.key]
    noise = NoiseConfig(drop_rate=0.3, spurious_rate=0.3, jitter_rate=0.3, seed=4)
    assert mock_teacher(sentence, gold, noise) == mock_teacher(sentence, gold, noise)
    dropped = mock_teacher(sentence, gold, NoiseConfig(drop_rate=1.0))
    assert dropped.raw == "None"
    assert dropped.parsed == {}


def test_noise_config():
    noise = NoiseConfig.from_cli("0.1,0.05,0.1,3")
    assert (noise.drop_rate, noise.spurious_rate, noise.jitter_rate, noise.seed) == (0.1, 0.05, 0.1, 3)
    with pytest.raises(ValueError):
        NoiseConfig.from_cli("0.1,0.2")
    with pytest.raises(ValueError):
        NoiseConfig(drop_rate=1.5)


def test_noisy_mock_teacher_label_f1_is_frozen(small_corpus, golden):
    noise = NoiseConfig(drop_rate=0.1, spurious_rate=0.05, jitter_rate=0.1, seed=13)
    gold = {}
    for ann in small_corpus.gold:
        gold.setdefault(ann.sentence_key, []).append(ann)
    labels = []
    for sentence in small_corpus.sentences:
        response = mock_teacher(sentence, gold.get(sentence.key, []), noise)
        annotations, _ = ground_spans(sentence, response.parsed, Provenance.TEACHER)
        labels.extend(annotations)

    keys = [s.key for s in small_corpus.sentences]
    strict = score(labels, small_corpus.gold, MatchMode.STRICT, keys)
    lenient = score(labels, small_corpus.gold, MatchMode.LENIENT, keys)
    assert strict.f1 <= lenient.f1 < 1.0
    frozen = {"strict": strict.to_dict(), "lenient": lenient.to_dict()}
    golden.check("mock_teacher_noise_seed13.json", json.dumps(frozen, indent=2, sort_keys=True) + "\n")
