"""
ADE Knowledge Distillation Pipeline
Main entry point: curate drug sentences, let a teacher annotate them, train
the unified drug-centric student and evaluate it.

    python main.py <command> --config config.toml [overrides]
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from typing import List, Optional, Sequence, Tuple

from modules.ade_model import (
    PairwiseBaseline,
    UnifiedAdeModel,
    build_vocab,
    evaluate_model,
    load_student,
    make_examples,
    pairwise_baseline_predict,
    pairwise_predict_annotations,
    predict,
    save_student,
    sized_config,
    tokenize_sentence,
    train,
)
from modules.artifacts import read_jsonl, write_json, write_jsonl, write_manifest
from modules.config import PipelineConfig, config_hash, load_config
from modules.corpus_pipeline import curate, load_documents, read_sentences, subsample, write_sentences
from modules.drug_lexicon import build_trie, find_mentions, load_lexicon_tsv
from modules.evaluation import (
    MatchMode,
    crossval,
    learning_curve,
    render_table,
    reports_table,
    score,
    split_8_1_1,
)
from modules.schema import (
    AdeAnnotation,
    AdeError,
    ConfigError,
    Mention,
    MissingArtifact,
    Provenance,
    Sentence,
    SequenceTooLong,
    group_by_sentence,
)
from modules.synth_corpus import AE_INVENTORY, generate
from modules.teacher import GroundingStats, NoiseConfig, PromptMode, filter_positive, find_event_mentions, ground_spans
from modules.teacher_client import ResponseCache, annotate, build_gold_index, get_teacher_client

logger = logging.getLogger("ade")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


# -----------------------
# Shared helpers
# -----------------------
def _out(config: PipelineConfig, name: str) -> str:
    return os.path.join(config.paths.out, name)


def _read_annotations(path: str) -> List[AdeAnnotation]:
    return [AdeAnnotation.from_dict(r) for r in read_jsonl(path)]


def _labeled_corpus(config: PipelineConfig) -> Tuple[List[Sentence], List[AdeAnnotation]]:
    """Sentences + gold from paths.sentences/paths.gold, or a synthetic corpus"""
    if config.paths.sentences and config.paths.gold:
        return read_sentences(config.paths.sentences), _read_annotations(config.paths.gold)
    print("🧪 No labelled corpus configured, generating the synthetic one")
    corpus = generate(load_lexicon_tsv(config.paths.lexicon), config.synth, config.seed)
    return corpus.sentences, corpus.gold


def _train_student(config: PipelineConfig, train_pairs, dev_pairs, seed: int, progress: bool) -> UnifiedAdeModel:
    """Train on [(sentence, annotations)] with [(sentence, annotations)] as dev"""
    tsents = [tokenize_sentence(s) for s, _ in train_pairs]
    examples = [ex for ts, (_, anns) in zip(tsents, train_pairs) for ex in make_examples(ts, anns)]
    vocab = build_vocab(tsents, config.training.min_count)
    model_config = config.model.model_copy(update={"seed": seed})
    dev = None
    if dev_pairs:
        dev = ([tokenize_sentence(s) for s, _ in dev_pairs], [a for _, anns in dev_pairs for a in anns])
    result = train(
        examples, sized_config(model_config, vocab), vocab,
        epochs=config.training.epochs, batch_size=config.training.batch_size, lr=config.training.lr,
        seed=seed, dev=dev, threshold=config.training.threshold, progress=progress,
    )
    return result.model


def _pairs(sentences: Sequence[Sentence], annotations: Sequence[AdeAnnotation]):
    by_key = group_by_sentence(annotations)
    return [(s, by_key.get(s.key, [])) for s in sentences]


def _evaluate(config: PipelineConfig, model, sentences, gold, predictor=None):
    return evaluate_model(model, [tokenize_sentence(s) for s in sentences], gold, config.training.threshold, predictor)


def _train_pairwise(config: PipelineConfig, train_pairs, seed: int, progress: bool) -> PairwiseBaseline:
    """Two-stage baseline (event tagger + marker relation classifier) on [(sentence, annotations)]"""
    tsents = [tokenize_sentence(s) for s, _ in train_pairs]
    vocab = build_vocab(tsents, config.training.min_count)
    return PairwiseBaseline.train(
        tsents, [a for _, anns in train_pairs for a in anns], config.model.model_copy(update={"seed": seed}), vocab,
        epochs=config.training.epochs, batch_size=config.training.batch_size, lr=config.training.lr,
        seed=seed, progress=progress,
    )


def _teacher_annotate(config: PipelineConfig, sentences: Sequence[Sentence], gold: Sequence[AdeAnnotation],
                      mode: PromptMode, progress: bool):
    """Prompt, call, parse and ground; returns ([(sentence, annotations)], stats, run)"""
    gold_index = build_gold_index(sentences, group_by_sentence(gold)) if gold is not None else None
    client = get_teacher_client(
        config.teacher.kind, config.teacher.endpoint, config.teacher.model,
        gold_index=gold_index, noise=config.teacher.noise_for(mode),
    )
    run = annotate(
        sentences, client, mode,
        max_parallel=config.teacher.max_parallel, max_retries=config.teacher.max_retries,
        cache=ResponseCache(config.paths.cache), backoff_base=config.teacher.backoff_base, progress=progress,
    )
    by_key = {s.key: s for s in sentences}
    stats = GroundingStats()
    labeled = []
    for response in run.responses:
        sentence = by_key[response.sentence_key]
        annotations, sentence_stats = ground_spans(sentence, response.parsed, Provenance.TEACHER)
        stats = stats + sentence_stats
        labeled.append((sentence, annotations))
    return labeled, stats, run


def _print_grounding(stats: GroundingStats, run) -> None:
    print(f"📊 Teacher calls: {run.calls}, cache hits: {run.cache_hits}, failures: {len(run.failures)}")
    print(f"📊 Drugs grounded: {stats.drugs_grounded}, ungrounded: {stats.drugs_ungrounded}")
    print(f"📊 Events grounded: {stats.events_grounded}/{stats.total_events}, hallucinated: {stats.hallucinated}")


def _finish(config: PipelineConfig, command: str, inputs: Sequence[str], outputs: Sequence[str]) -> None:
    write_manifest(config.paths.out, command, config.model_dump(mode="json"), config_hash(config), inputs, outputs)
    print(f"✅ Artifacts written to {config.paths.out}")


# -----------------------
# Commands
# -----------------------
def cmd_synth(config: PipelineConfig, args) -> int:
    corpus = generate(load_lexicon_tsv(config.paths.lexicon), config.synth, config.seed)
    outputs = [_out(config, n) for n in ("documents.jsonl", "sentences.jsonl", "gold.jsonl")]
    write_jsonl(outputs[0], (d.to_dict() for d in corpus.documents))
    write_sentences(outputs[1], corpus.sentences)
    write_jsonl(outputs[2], (a.to_dict() for a in corpus.gold))
    print(f"📊 Documents: {len(corpus.documents)}, sentences: {len(corpus.sentences)}, gold ADEs: {len(corpus.gold)}")
    _finish(config, "synth", [config.paths.lexicon], outputs)
    return EXIT_OK


def cmd_curate(config: PipelineConfig, args) -> int:
    trie = build_trie(load_lexicon_tsv(config.paths.lexicon))
    documents = load_documents(config.paths.corpus)
    sentences, stats = curate(documents, trie, config.max_workers)
    output = _out(config, "sentences.jsonl")
    write_sentences(output, sentences)
    print(f"📊 Documents: {stats.docs}, sentences: {stats.sentences}, kept: {stats.kept}")
    _finish(config, "curate", [config.paths.lexicon, config.paths.corpus], [output])
    return EXIT_OK


def cmd_annotate(config: PipelineConfig, args) -> int:
    sentences_path = config.paths.sentences or _out(config, "sentences.jsonl")
    sentences = read_sentences(sentences_path)
    gold = _read_annotations(config.paths.gold) if config.paths.gold else None
    mode = config.teacher.mode

    labeled, stats, run = _teacher_annotate(config, sentences, gold, mode, args.progress)
    positive = filter_positive(labeled)
    pool = subsample(positive, config.distill_pool_size, config.seed)

    outputs = [_out(config, n) for n in ("teacher_responses.jsonl", "failures.jsonl",
                                         "pool_sentences.jsonl", "annotations.jsonl")]
    write_jsonl(outputs[0], (r.to_dict() for r in run.responses))
    write_jsonl(outputs[1], ({"doc_id": f.sentence_key[0], "sent_index": f.sentence_key[1],
                              "error": f.last_error} for f in run.failures))
    write_sentences(outputs[2], [s for s, _ in pool])
    write_jsonl(outputs[3], (a.to_dict() for _, anns in pool for a in anns))

    _print_grounding(stats, run)
    print(f"📊 Sentences: {len(sentences)}, answered: {len(run.responses)}, positive: {len(positive)}, "
          f"pooled: {len(pool)}")
    _finish(config, "annotate", [sentences_path] + ([config.paths.gold] if config.paths.gold else []), outputs)
    return EXIT_OK


def cmd_train(config: PipelineConfig, args) -> int:
    sentences_path = config.paths.sentences or _out(config, "pool_sentences.jsonl")
    annotations_path = config.paths.annotations or config.paths.gold or _out(config, "annotations.jsonl")
    pairs = _pairs(read_sentences(sentences_path), _read_annotations(annotations_path))
    train_pairs, dev_pairs, test_pairs = split_8_1_1(pairs, config.seed)
    print(f"📊 Train: {len(train_pairs)}, dev: {len(dev_pairs)}, test: {len(test_pairs)}")

    model = _train_student(config, train_pairs, dev_pairs, config.model.seed, args.progress)
    student_dir = config.paths.student or _out(config, "student")
    paths = save_student(student_dir, model)

    reports = []
    if test_pairs:
        strict, lenient = _evaluate(config, model, [s for s, _ in test_pairs], [a for _, anns in test_pairs for a in anns])
        reports = [("student", strict), ("student", lenient)]
        print(reports_table(reports))
    report_path = _out(config, "train_report.json")
    write_json(report_path, {
        "split": {"train": len(train_pairs), "dev": len(dev_pairs), "test": len(test_pairs)},
        "test": [r.to_dict() for _, r in reports],
    })
    _finish(config, "train", [sentences_path, annotations_path], list(paths.values()) + [report_path])
    return EXIT_OK


def cmd_eval(config: PipelineConfig, args) -> int:
    student_dir = config.paths.student or _out(config, "student")
    model = load_student(student_dir)
    sentences_path = config.paths.sentences or _out(config, "sentences.jsonl")
    if not config.paths.gold:
        raise ConfigError("eval needs gold annotations (paths.gold)")
    sentences = read_sentences(sentences_path)
    gold = _read_annotations(config.paths.gold)
    keys = {s.key for s in sentences}
    gold = [g for g in gold if g.sentence_key in keys]

    predictions = []
    for sentence in sentences:
        try:
            result = predict(tokenize_sentence(sentence), model, config.training.threshold)
        except SequenceTooLong:
            logger.warning("Skipping sentence %s: longer than max_seq_len", sentence.key)
            continue
        for drug_key, events in result.events.items():
            drug = result.drugs[drug_key]
            predictions.append({
                "doc_id": sentence.doc_id,
                "sent_index": sentence.sent_index,
                "drug": drug.to_dict(),
                "events": [dict(e.to_dict(), score=s) for e, s in zip(events, result.scores[drug_key])],
            })
    preds = [
        AdeAnnotation((p["doc_id"], p["sent_index"]), Mention.from_dict(p["drug"]),
                      [Mention.from_dict(e) for e in p["events"]], Provenance.STUDENT)
        for p in predictions
    ]
    strict = score(preds, gold, MatchMode.STRICT, keys)
    lenient = score(preds, gold, MatchMode.LENIENT, keys)
    print(reports_table([("student", strict), ("student", lenient)]))

    outputs = [_out(config, "predictions.jsonl"), _out(config, "eval_report.json")]
    write_jsonl(outputs[0], predictions)
    write_json(outputs[1], {"strict": strict.to_dict(), "lenient": lenient.to_dict()})
    _finish(config, "eval", [sentences_path, config.paths.gold, os.path.join(student_dir, "checkpoint.ade1")], outputs)
    return EXIT_OK


def cmd_distill(config: PipelineConfig, args) -> int:
    """annotate -> train -> eval, comparing the student with its teacher's labels"""
    sentences, gold = _labeled_corpus(config)
    train_s, dev_s, test_s = split_8_1_1(sentences, config.seed)
    test_keys = {s.key for s in test_s}
    test_gold = [g for g in gold if g.sentence_key in test_keys]
    mode = config.teacher.mode

    print(f"\n🤖 Teacher annotating {len(train_s) + len(dev_s)} sentences ({mode.value}-shot mode)")
    labeled, stats, run = _teacher_annotate(config, train_s + dev_s, gold, mode, args.progress)
    _print_grounding(stats, run)
    positive = filter_positive(labeled)
    dev_keys = {s.key for s in dev_s}
    train_pos = [p for p in positive if p[0].key not in dev_keys]
    dev_pos = [p for p in positive if p[0].key in dev_keys]
    pool = subsample(train_pos, config.distill_pool_size, config.seed)
    stages = {
        "sentences": len(sentences),
        "train_dev": len(train_s) + len(dev_s),
        "test": len(test_s),
        "answered": len(run.responses),
        "failed": len(run.failures),
        "positive": len(positive),
        "negative_dropped": len(run.responses) - len(positive),
        "positive_train": len(train_pos),
        "positive_dev": len(dev_pos),
        "pooled": len(pool),
    }

    print("\n🎓 Training the student on teacher labels")
    student = _train_student(config, pool, dev_pos, config.model.seed, args.progress)
    reports = {"student": _evaluate(config, student, test_s, test_gold)}

    if args.pairwise:
        print("\n🔗 Training the pairwise baseline on the same teacher labels")
        baseline = _train_pairwise(config, pool, config.model.seed, args.progress)
        reports["pairwise baseline"] = _evaluate(config, baseline, test_s, test_gold, pairwise_predict_annotations)

    for teacher_mode in PromptMode:
        test_labeled, _, _ = _teacher_annotate(config, test_s, gold, teacher_mode, args.progress)
        teacher_preds = [a for _, anns in test_labeled for a in anns]
        reports[f"teacher ({teacher_mode.value})"] = (
            score(teacher_preds, test_gold, MatchMode.STRICT, test_keys),
            score(teacher_preds, test_gold, MatchMode.LENIENT, test_keys),
        )

    if not args.no_supervised:
        print("\n📚 Training the supervised reference on gold labels")
        supervised = _train_student(config, _pairs(train_s, gold), _pairs(dev_s, gold), config.model.seed, args.progress)
        reports["supervised (gold)"] = _evaluate(config, supervised, test_s, test_gold)

    named = [(name, r) for name, pair in reports.items() for r in pair]
    print("\n" + "=" * 70)
    print(render_table(["stage", "count"], list(stages.items())))
    print()
    print(reports_table(named))
    print("=" * 70)

    save_student(_out(config, "student"), student)
    report_path = _out(config, "distill_report.json")
    write_json(report_path, {
        "stages": stages,
        "grounding": stats.to_dict(),
        "reports": {name: {"strict": s.to_dict(), "lenient": l.to_dict()} for name, (s, l) in reports.items()},
    })
    _finish(config, "distill", [config.paths.lexicon], [report_path])
    return EXIT_OK


def bench_sentence(entries, trie, m_drugs: int, n_events: int) -> Tuple[Sentence, List[Mention]]:
    """One sentence with exactly m distinct drugs and n distinct event phrases"""
    surfaces = [e.preferred_name for e in entries[:m_drugs]]
    events = list(AE_INVENTORY[:n_events])
    text = f"Patients received {', '.join(surfaces)}"
    if events:
        text += f" and developed {', '.join(events)}"
    text += "."
    sentence = Sentence("bench", 0, text, find_mentions(text, trie))
    candidates = [m for event in events for m in find_event_mentions(text, event)]
    return sentence, candidates


def cmd_bench(config: PipelineConfig, args) -> int:
    entries = load_lexicon_tsv(config.paths.lexicon)
    trie = build_trie(entries)
    sizes = config.evaluation.bench_sizes
    if max(sizes) > len(entries) or max(sizes) > len(AE_INVENTORY):
        raise ConfigError(f"bench sizes up to {max(sizes)} need that many lexicon drugs and event phrases")

    cases = [(m, n, *bench_sentence(entries, trie, m, n)) for m in sizes for n in sizes]
    tsents = {(m, n): tokenize_sentence(s) for m, n, s, _ in cases}
    vocab = build_vocab(list(tsents.values()))
    model_config = sized_config(config.model, vocab)
    unified = UnifiedAdeModel.create(model_config, vocab).eval()
    baseline = PairwiseBaseline.create(model_config, vocab)
    baseline.tagger.eval()
    baseline.relation.eval()

    rows, failures = [], []
    for m, n, _, candidates in cases:
        tsent = tsents[(m, n)]
        start = time.perf_counter()
        for _ in range(config.evaluation.bench_repeats):
            unified_result = predict(tsent, unified)
        unified_seconds = (time.perf_counter() - start) / config.evaluation.bench_repeats
        start = time.perf_counter()
        for _ in range(config.evaluation.bench_repeats):
            pairwise_result = pairwise_baseline_predict(tsent, baseline, candidates=candidates)
        pairwise_seconds = (time.perf_counter() - start) / config.evaluation.bench_repeats

        report, pair_report = unified_result.report, pairwise_result.report
        if report.head_passes != m or report.encoder_passes != 1 or pair_report.pairwise_units != n * m:
            failures.append((m, n))
        rows.append({
            "m_drugs": m, "n_events": n,
            "encoder_passes": report.encoder_passes, "head_passes": report.head_passes,
            "pairwise_units": pair_report.pairwise_units,
            "unified_seconds": unified_seconds, "pairwise_seconds": pairwise_seconds,
            "speedup": pairwise_seconds / unified_seconds if unified_seconds > 0 else float("inf"),
        })

    output = _out(config, "bench.csv")
    os.makedirs(config.paths.out, exist_ok=True)
    with open(output, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(render_table(list(rows[0]), [list(r.values()) for r in rows]))
    _finish(config, "bench", [config.paths.lexicon], [output])

    if failures:
        print(f"❌ Inference accounting wrong for (M, N) = {failures}")
        return EXIT_FAILURE
    at_eight = [r for r in rows if r["m_drugs"] == 8 and r["n_events"] == 8]
    if at_eight:
        speedup = at_eight[0]["speedup"]
        print(f"📊 Unified vs pairwise at N=M=8: {speedup:.1f}x faster")
        if speedup < 1.5:
            print("❌ Unified inference is not faster than the pairwise baseline")
            return EXIT_FAILURE
    return EXIT_OK


def cmd_crossval(config: PipelineConfig, args) -> int:
    sentences, gold = _labeled_corpus(config)
    pairs = _pairs(sentences, gold)

    def _train(train_items, dev_items, seed):
        return _train_student(config, train_items, dev_items, seed, args.progress)

    def _eval(model, test_items):
        return _evaluate(config, model, [s for s, _ in test_items], [a for _, anns in test_items for a in anns])

    result = crossval(pairs, config.evaluation.k, config.seed, _train, _eval)
    summary = result.to_dict()
    rows = [[i + 1, s.f1, l.f1] for i, (s, l) in enumerate(zip(result.strict, result.lenient))]
    rows.append(["mean", summary["strict"]["mean_f1"], summary["lenient"]["mean_f1"]])
    print(render_table(["fold", "strict_f1", "lenient_f1"], rows))

    output = _out(config, "crossval.json")
    write_json(output, summary)
    _finish(config, "crossval", [config.paths.lexicon], [output])
    return EXIT_OK


def cmd_curve(config: PipelineConfig, args) -> int:
    sentences, gold = _labeled_corpus(config)
    train_pairs, dev_pairs, test_pairs = split_8_1_1(_pairs(sentences, gold), config.seed)
    sizes = [s for s in config.evaluation.curve_sizes if s <= len(train_pairs)]
    dropped = set(config.evaluation.curve_sizes) - set(sizes)
    if dropped:
        print(f"⚠️ Skipping sizes larger than the training split ({len(train_pairs)}): {sorted(dropped)}")

    def _train(train_items, dev_items, seed):
        return _train_student(config, train_items, dev_items, seed, args.progress)

    def _eval(model, test_items):
        return _evaluate(config, model, [s for s, _ in test_items], [a for _, anns in test_items for a in anns])

    rows = []
    for seed in config.evaluation.curve_seeds:
        rows.extend(learning_curve(train_pairs, dev_pairs, test_pairs, sizes, seed, _train, _eval,
                                   reference_f1=args.reference_f1))

    output = _out(config, "curve.csv")
    os.makedirs(config.paths.out, exist_ok=True)
    headers = ["size", "seed", "f1", "strict_f1", "reference_f1"]
    with open(output, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(headers)
        writer.writerows([r.size, r.seed, r.f1, r.strict_f1, r.reference_f1] for r in rows)
    print(render_table(headers, [[r.size, r.seed, r.f1, r.strict_f1, r.reference_f1 or "-"] for r in rows]))
    _finish(config, "curve", [config.paths.lexicon], [output])
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "Generate a synthetic corpus with gold ADEs"),
    "curate": (cmd_curate, "Split documents and keep drug sentences"),
    "annotate": (cmd_annotate, "Annotate sentences with the teacher"),
    "train": (cmd_train, "Train the student"),
    "eval": (cmd_eval, "Evaluate a trained student against gold"),
    "distill": (cmd_distill, "annotate -> train -> eval with a teacher comparison"),
    "bench": (cmd_bench, "Unified vs pairwise inference accounting and timing"),
    "crossval": (cmd_crossval, "k-fold cross validation on gold"),
    "curve": (cmd_curve, "Supervised learning curve over training sizes"),
}


# -----------------------
# Argument handling
# -----------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ade", description="ADE knowledge distillation pipeline")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.set_defaults(func=func)
        sub.add_argument("--config", help="TOML config file")
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="Override any config field, e.g. training.epochs=5")
        sub.add_argument("--mode", choices=[m.value for m in PromptMode])
        sub.add_argument("--teacher", choices=["mock", "real"])
        sub.add_argument("--max-parallel", type=int)
        sub.add_argument("--noise", help="drop,spurious,jitter,seed")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--out")
        sub.add_argument("--epochs", type=int)
        sub.add_argument("--threshold", type=float)
        sub.add_argument("--verbose", action="store_true")
        sub.add_argument("--quiet", action="store_true")
        if name == "distill":
            sub.add_argument("--no-supervised", action="store_true", help="Skip the supervised-on-gold reference")
            sub.add_argument("--pairwise", action="store_true",
                             help="Also train and score the two-stage pairwise baseline")
        if name == "curve":
            sub.add_argument("--reference-f1", type=float, help="Distilled F1 shown next to each size")
    return parser


def resolve_config(args) -> PipelineConfig:
    """TOML + --set overrides, then the named flags (flags win)"""
    overrides = list(args.overrides)
    named = {
        "teacher.mode": args.mode,
        "teacher.kind": args.teacher,
        "teacher.max_parallel": args.max_parallel,
        "seed": args.seed,
        "paths.out": args.out,
        "training.epochs": args.epochs,
        "training.threshold": args.threshold,
    }
    for key, value in named.items():
        if value is not None:
            overrides.append(f"{key}={json.dumps(value)}")
    config = load_config(args.config, overrides)
    if args.noise:
        try:
            noise = NoiseConfig.from_cli(args.noise)
        except ValueError as e:
            raise ConfigError(f"--noise: {e}") from e
        config = config.model_copy(update={"teacher": config.teacher.model_copy(update={"noise": noise})})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args.progress = not args.quiet and sys.stderr.isatty()
    args.no_supervised = getattr(args, "no_supervised", False)
    args.pairwise = getattr(args, "pairwise", False)
    args.reference_f1 = getattr(args, "reference_f1", None)

    try:
        config = resolve_config(args)
        print(f"🚀 ade {args.command} (config {config_hash(config)[:12]})")
        return args.func(config, args)
    except (ConfigError, MissingArtifact) as e:
        print(f"❌ {e}")
        return EXIT_USAGE
    except AdeError as e:
        print(f"❌ {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
