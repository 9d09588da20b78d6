"""
End-to-end runs on the synthetic corpus. Deselected by default; run with
    pytest -m slow
"""

import csv
import json
import os
import statistics

import pytest

from main import main
from modules.ade_model import (
    PairwiseBaseline,
    build_vocab,
    evaluate_model,
    make_examples,
    pairwise_predict_annotations,
    sized_config,
    tokenize_sentence,
    train,
)
from modules.evaluation import split_8_1_1
from modules.neural_core import ModelConfig
from modules.schema import group_by_sentence
from modules.synth_corpus import SynthConfig, generate

pytestmark = pytest.mark.slow

ROOT = os.path.dirname(os.path.abspath(__file__))
CONFIG = os.path.join(ROOT, "config.toml")
LEXICON = os.path.join(ROOT, "data", "sample_lexicon.tsv")


def _run(tmp_path, command, *extra, sets=()):
    argv = [command, "--config", CONFIG, "--quiet", "--out", str(tmp_path / "out"),
            "--set", f"paths.lexicon={LEXICON}", "--set", f"paths.cache={tmp_path / 'cache'}"]
    for item in sets:
        argv += ["--set", item]
    return main(argv + list(extra))


def _gold_splits(lexicon_entries):
    corpus = generate(lexicon_entries, SynthConfig(n_sentences=2500), seed=1)
    gold = group_by_sentence(corpus.gold)
    splits = split_8_1_1(corpus.sentences, seed=1)
    assert tuple(map(len, splits)) == (2000, 250, 250)
    return [([tokenize_sentence(s) for s in part], [a for s in part for a in gold.get(s.key, [])]) for part in splits]


def _train_unified(train_split, dev_split, epochs):
    tsents, gold = train_split
    by_key = group_by_sentence(gold)
    examples = [ex for ts in tsents for ex in make_examples(ts, by_key.get(ts.sentence.key, []))]
    vocab = build_vocab(tsents)
    result = train(examples, ModelConfig(vocab_size=len(vocab)), vocab, epochs=epochs, batch_size=32, lr=1e-3,
                   seed=0, dev=dev_split)
    return result.model, vocab


def test_supervised_learnability(lexicon_entries):
    train_split, dev_split, (test_tsents, test_gold) = _gold_splits(lexicon_entries)
    model, _ = _train_unified(train_split, dev_split, epochs=30)
    _, lenient = evaluate_model(model, test_tsents, test_gold)
    assert lenient.f1 >= 0.95


def test_pairwise_baseline_tracks_unified_model(lexicon_entries):
    train_split, dev_split, (test_tsents, test_gold) = _gold_splits(lexicon_entries)
    unified, vocab = _train_unified(train_split, dev_split, epochs=15)
    config = sized_config(ModelConfig(vocab_size=len(vocab)), vocab)
    baseline = PairwiseBaseline.train(*train_split, config, vocab, epochs=15, batch_size=32, lr=1e-3, seed=0)

    _, unified_f1 = evaluate_model(unified, test_tsents, test_gold)
    _, pairwise_f1 = evaluate_model(baseline, test_tsents, test_gold, predictor=pairwise_predict_annotations)
    assert abs(unified_f1.f1 - pairwise_f1.f1) <= 0.03


def test_student_outperforms_noisy_teacher(tmp_path):
    student, teacher = [], []
    for seed in (1, 2, 3):
        out = tmp_path / f"seed{seed}"
        code = _run(out, "distill", "--seed", str(seed), "--noise", f"0.10,0.05,0.10,{seed}", "--no-supervised",
                    sets=["synth.n_sentences=5000"])
        assert code == 0
        report = json.loads((out / "out" / "distill_report.json").read_text(encoding="utf-8"))["reports"]
        student.append(report["student"]["lenient"]["f1"])
        teacher.append(report["teacher (few)"]["lenient"]["f1"])
    assert statistics.fmean(student) > statistics.fmean(teacher)
    assert min(student) >= statistics.fmean(teacher) - 0.005


def test_bench_full_sweep(tmp_path):
    assert _run(tmp_path, "bench") == 0
    with open(tmp_path / "out" / "bench.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 25
    (eight,) = [r for r in rows if r["m_drugs"] == "8" and r["n_events"] == "8"]
    assert (int(eight["head_passes"]), int(eight["pairwise_units"])) == (8, 64)


def test_learning_curve_is_non_decreasing(tmp_path):
    assert _run(tmp_path, "curve", sets=["synth.n_sentences=2500"]) == 0
    with open(tmp_path / "out" / "curve.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    by_size = {}
    for row in rows:
        by_size.setdefault(int(row["size"]), []).append(float(row["f1"]))
    means = [statistics.fmean(by_size[size]) for size in sorted(by_size)]
    assert sorted(by_size) == [100, 500, 2000]
    assert all(b >= a - 0.01 for a, b in zip(means, means[1:]))
