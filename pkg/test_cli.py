import csv
import json
import os
import re

import pytest

from main import bench_sentence, main
from modules.artifacts import read_jsonl, sha256_file
from modules.drug_lexicon import build_trie

ROOT = os.path.dirname(os.path.abspath(__file__))
LEXICON = os.path.join(ROOT, "data", "sample_lexicon.tsv")
CORPUS = os.path.join(ROOT, "data", "sample_abstracts.jsonl")
TINY_MODEL = ["model.d_model=8", "model.n_heads=2", "model.n_layers=1", "training.batch_size=8"]


def _run(tmp_path, command, *extra, sets=(), out="out"):
    argv = [command, "--quiet", "--out", str(tmp_path / out)]
    for item in [f"paths.lexicon={LEXICON}", f"paths.cache={tmp_path / 'cache'}", *sets]:
        argv += ["--set", item]
    return main(argv + list(extra))


def _synth(tmp_path, n=30, out="corpus"):
    assert _run(tmp_path, "synth", sets=[f"synth.n_sentences={n}"], out=out) == 0
    return str(tmp_path / out / "sentences.jsonl"), str(tmp_path / out / "gold.jsonl")


def _triples(records):
    return sorted(
        (r["doc_id"], r["sent_index"], r["drug"]["start"], tuple((e["start"], e["end"]) for e in r["events"]))
        for r in records
    )


def _call_tally(output):
    match = re.search(r"Teacher calls: (\d+), cache hits: (\d+)", output)
    return int(match.group(1)), int(match.group(2))


def test_synth_writes_corpus_and_manifest(tmp_path, capsys):
    sentences, gold = _synth(tmp_path)
    assert len(read_jsonl(sentences)) == 30
    assert read_jsonl(gold)
    manifest = json.loads((tmp_path / "corpus" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "synth"
    assert manifest["version"] == "0.1.0"
    assert len(manifest["config_hash"]) == 64
    assert sentences in manifest["outputs"]
    assert "Documents:" in capsys.readouterr().out


def test_curate_sample_corpus_matches_golden(tmp_path, capsys, golden):
    assert _run(tmp_path, "curate", sets=[f"paths.corpus={CORPUS}"]) == 0
    assert "Documents: 20, sentences: 60, kept: 35" in capsys.readouterr().out
    output = tmp_path / "out" / "sentences.jsonl"
    assert all(r["drug_mentions"] for r in read_jsonl(str(output)))
    golden.check("curate_sentences.jsonl", output.read_text(encoding="utf-8"))


def test_curate_empty_corpus(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    assert _run(tmp_path, "curate", sets=[f"paths.corpus={empty}"]) == 0
    assert read_jsonl(str(tmp_path / "out" / "sentences.jsonl")) == []


def test_curate_missing_corpus(tmp_path, capsys):
    assert _run(tmp_path, "curate", sets=[f"paths.corpus={tmp_path / 'nope.jsonl'}"]) == 2
    assert "nope.jsonl" in capsys.readouterr().out


def test_annotate_mock_without_noise_reproduces_gold(tmp_path, capsys):
    sentences, gold = _synth(tmp_path)
    sets = [f"paths.sentences={sentences}", f"paths.gold={gold}"]
    assert _run(tmp_path, "annotate", "--noise", "0,0,0,0", "--mode", "zero", sets=sets) == 0
    annotations = read_jsonl(str(tmp_path / "out" / "annotations.jsonl"))
    assert _triples(annotations) == _triples(read_jsonl(gold))
    assert all(a["provenance"] == "teacher" for a in annotations)
    calls, hits = _call_tally(capsys.readouterr().out)
    assert calls > 0 and calls + hits == 30

    assert _run(tmp_path, "annotate", "--noise", "0,0,0,0", "--mode", "zero", sets=sets, out="again") == 0
    assert _call_tally(capsys.readouterr().out) == (0, 30)
    assert read_jsonl(str(tmp_path / "again" / "teacher_responses.jsonl")) == \
        read_jsonl(str(tmp_path / "out" / "teacher_responses.jsonl"))


def test_annotate_real_teacher_needs_key(tmp_path, monkeypatch):
    monkeypatch.delenv("TEACHER_API_KEY", raising=False)
    sentences, _ = _synth(tmp_path, n=5)
    assert _run(tmp_path, "annotate", "--teacher", "real", sets=[f"paths.sentences={sentences}"]) == 2


def test_train_is_reproducible_and_eval_reads_checkpoint(tmp_path):
    sentences, gold = _synth(tmp_path, n=40)
    sets = [f"paths.sentences={sentences}", f"paths.gold={gold}", *TINY_MODEL]
    for name in ("a", "b"):
        assert _run(tmp_path, "train", "--epochs", "2", sets=sets + [f"paths.student={tmp_path / name}"],
                    out=f"train_{name}") == 0
    assert sha256_file(str(tmp_path / "a" / "checkpoint.ade1")) == sha256_file(str(tmp_path / "b" / "checkpoint.ade1"))
    report = json.loads((tmp_path / "train_a" / "train_report.json").read_text(encoding="utf-8"))
    assert report["split"] == {"train": 32, "dev": 4, "test": 4}

    assert _run(tmp_path, "eval", sets=sets + [f"paths.student={tmp_path / 'a'}"], out="eval") == 0
    eval_report = json.loads((tmp_path / "eval" / "eval_report.json").read_text(encoding="utf-8"))
    assert set(eval_report) == {"strict", "lenient"}
    assert eval_report["strict"]["f1"] <= eval_report["lenient"]["f1"]
    for prediction in read_jsonl(str(tmp_path / "eval" / "predictions.jsonl")):
        assert all(0.0 <= e["score"] <= 1.0 for e in prediction["events"])


def test_eval_without_checkpoint(tmp_path):
    sentences, gold = _synth(tmp_path, n=5)
    sets = [f"paths.sentences={sentences}", f"paths.gold={gold}", f"paths.student={tmp_path / 'missing'}"]
    assert _run(tmp_path, "eval", sets=sets) == 2


def test_distill_report_conserves_counts(tmp_path):
    sets = ["synth.n_sentences=60", *TINY_MODEL]
    assert _run(tmp_path, "distill", "--epochs", "1", "--pairwise", sets=sets) == 0
    report = json.loads((tmp_path / "out" / "distill_report.json").read_text(encoding="utf-8"))
    stages = report["stages"]
    assert stages["sentences"] == 60
    assert stages["train_dev"] + stages["test"] == stages["sentences"]
    assert stages["answered"] + stages["failed"] == stages["train_dev"]
    assert stages["positive"] + stages["negative_dropped"] == stages["answered"]
    assert stages["positive_train"] + stages["positive_dev"] == stages["positive"]
    assert set(report["reports"]) == {"student", "pairwise baseline", "teacher (zero)", "teacher (few)", "supervised (gold)"}
    assert os.path.exists(tmp_path / "out" / "student" / "checkpoint.ade1")


def test_crossval_and_curve(tmp_path):
    sets = ["synth.n_sentences=20", "evaluation.k=2", "evaluation.curve_sizes=[4, 8, 100]",
            "evaluation.curve_seeds=[1]", *TINY_MODEL]
    assert _run(tmp_path, "crossval", "--epochs", "1", sets=sets) == 0
    summary = json.loads((tmp_path / "out" / "crossval.json").read_text(encoding="utf-8"))
    assert len(summary["lenient"]["folds"]) == 2

    assert _run(tmp_path, "curve", "--epochs", "1", "--reference-f1", "0.9", sets=sets) == 0
    with open(tmp_path / "out" / "curve.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["size"]) for r in rows] == [4, 8]
    assert all(float(r["reference_f1"]) == 0.9 for r in rows)


def test_bench_small_sizes(tmp_path):
    sets = ["evaluation.bench_sizes=[1, 2]", "evaluation.bench_repeats=1", *TINY_MODEL]
    assert _run(tmp_path, "bench", sets=sets) == 0
    with open(tmp_path / "out" / "bench.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    for row in rows:
        m, n = int(row["m_drugs"]), int(row["n_events"])
        assert int(row["head_passes"]) == m
        assert int(row["encoder_passes"]) == 1
        assert int(row["pairwise_units"]) == m * n


def test_bench_without_sizes_is_a_usage_error(tmp_path):
    assert _run(tmp_path, "bench", sets=["evaluation.bench_sizes=[]"]) == 2


def test_bench_sentence(lexicon_entries):
    sentence, candidates = bench_sentence(lexicon_entries, build_trie(lexicon_entries), 8, 8)
    assert len({m.concept_id for m in sentence.drug_mentions}) == 8
    assert len(candidates) == 8
    assert all(c.is_valid_in(sentence.text) for c in candidates)


def test_bad_config_exits_with_usage_error(tmp_path):
    assert _run(tmp_path, "synth", sets=["training.epochs=-3"]) == 2
    assert main(["synth", "--config", str(tmp_path / "missing.toml")]) == 2
    with pytest.raises(SystemExit):
        main(["unknown-command"])
