"""
Unified Drug-centric ADE Model
One encoder pass per sentence; for each drug the mean-pooled drug vector is
concatenated to every token state and a linear-sigmoid head marks the
adverse-event tokens caused by that drug. Also holds the training loop and
the two-stage pairwise baseline used for the complexity comparison.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import torch
from torch import nn
from tqdm import tqdm

from modules.artifacts import atomic_write_text, read_json
from modules.drug_lexicon import normalize_surface
from modules.evaluation import EvalReport, MatchMode, score
from modules.neural_core import (
    DTYPE,
    Encoder,
    ModelConfig,
    bce_with_logits,
    load_checkpoint,
    optimizer_step,
    param_set,
    save_checkpoint,
    seeded_module,
    squash,
)
from modules.schema import (
    AdeAnnotation,
    EmptyDrugSpan,
    EmptyTrainingSet,
    Mention,
    Provenance,
    Sentence,
    SequenceTooLong,
    ShapeMismatch,
    slice_bytes,
)
from modules.tokenizer import DRUG_CLOSE, DRUG_OPEN, EVENT_CLOSE, EVENT_OPEN, Token, Vocabulary, tokenize

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


# -----------------------
# Sentence views
# -----------------------
@dataclass
class TokenizedSentence:
    sentence: Sentence
    tokens: List[Token]
    # normalized drug surface -> inclusive token ranges of every occurrence
    drug_token_spans: Dict[str, List[Tuple[int, int]]]
    # normalized drug surface -> first mention (the drug's representative)
    drugs: Dict[str, Mention]

    @property
    def T(self) -> int:
        return len(self.tokens)

    def drug_indices(self, drug_key: str) -> List[int]:
        return [i for a, b in self.drug_token_spans[drug_key] for i in range(a, b + 1)]

    def token_range(self, start: int, end: int) -> Optional[Tuple[int, int]]:
        """Inclusive token range overlapping the byte span [start, end)"""
        covered = [i for i, t in enumerate(self.tokens) if t.start < end and start < t.end]
        return (covered[0], covered[-1]) if covered else None


def tokenize_sentence(sentence: Sentence) -> TokenizedSentence:
    tsent = TokenizedSentence(sentence, tokenize(sentence.text), {}, {})
    for mention in sentence.drug_mentions:
        key = normalize_surface(mention.surface)
        token_range = tsent.token_range(mention.start, mention.end)
        if token_range is None:
            continue
        tsent.drugs.setdefault(key, mention)
        tsent.drug_token_spans.setdefault(key, []).append(token_range)
    return tsent


@dataclass
class TrainingExample:
    tsent: TokenizedSentence
    drug_key: str
    drug_indices: List[int]
    labels: List[int]


@dataclass
class ComplexityReport:
    n_events: int = 0
    m_drugs: int = 0
    encoder_passes: int = 0
    head_passes: int = 0
    pairwise_units: int = 0


def make_examples(tsent: TokenizedSentence, annotations: Sequence[AdeAnnotation]) -> List[TrainingExample]:
    """
    One example per drug of the sentence, including drugs without events.
    A token is positive iff it overlaps an event span of that drug.
    """
    events_by_drug: Dict[str, List[Mention]] = {}
    for ann in annotations:
        events_by_drug.setdefault(normalize_surface(ann.drug.surface), []).extend(ann.events)

    examples = []
    for drug_key in tsent.drug_token_spans:
        events = events_by_drug.get(drug_key, [])
        labels = [
            1 if any(t.start < e.end and e.start < t.end for e in events) else 0
            for t in tsent.tokens
        ]
        examples.append(TrainingExample(tsent, drug_key, tsent.drug_indices(drug_key), labels))
    return examples


# -----------------------
# Architecture pieces
# -----------------------
def pool_drug(H: torch.Tensor, drug_token_indices: Sequence[int]) -> torch.Tensor:
    """Mean of the hidden states at the drug's token positions"""
    if len(drug_token_indices) == 0:
        raise EmptyDrugSpan("drug has no tokens to pool")
    index = torch.tensor(list(drug_token_indices), dtype=torch.long)
    return H.index_select(0, index).mean(dim=0)


def head_logits(H: torch.Tensor, d_bar: torch.Tensor, W: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    T, d = H.shape
    if d_bar.shape != (d,) or W.shape != (2 * d,) or b.numel() != 1:
        raise ShapeMismatch(
            f"head shapes: H={tuple(H.shape)} d_bar={tuple(d_bar.shape)} W={tuple(W.shape)} b={tuple(b.shape)}"
        )
    augmented = torch.cat([H, d_bar.expand(T, d)], dim=1)
    return augmented @ W + b.reshape(())


def head_forward(H: torch.Tensor, d_bar: torch.Tensor, W: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """p_i = sigmoid(W . [h_i ; d_bar] + b) for every token i"""
    return squash(head_logits(H, d_bar, W, b))


def decode_spans(p: Sequence[float], threshold: float, tokens: Sequence[Token], text: str) -> List[Mention]:
    """Maximal runs of tokens with p >= threshold, each becoming one Mention"""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    spans = []
    run_start = None
    values = [float(v) for v in p]
    for i, value in enumerate(values + [float("-inf")]):
        if value >= threshold and run_start is None:
            run_start = i
        elif value < threshold and run_start is not None:
            start, end = tokens[run_start].start, tokens[i - 1].end
            spans.append(Mention(start, end, slice_bytes(text, start, end)))
            run_start = None
    return spans


class UnifiedAdeModel(nn.Module):
    """Encoder + drug pooling + concatenation + linear-sigmoid token head"""

    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.encoder = Encoder(config)
        self.head_weight = nn.Parameter(torch.randn(2 * config.d_model, dtype=DTYPE) * 0.02)
        self.head_bias = nn.Parameter(torch.zeros(1, dtype=DTYPE))

    @classmethod
    def create(cls, config: ModelConfig, vocab: Vocabulary) -> "UnifiedAdeModel":
        return seeded_module(lambda: cls(config, vocab), config.seed)

    def forward(self, token_ids: torch.Tensor, key_mask: torch.Tensor, drug_mask: torch.Tensor) -> torch.Tensor:
        """
        Batched logits.

        Args:
            token_ids: [B, T]
            key_mask: [B, T] bool, real tokens
            drug_mask: [B, T] bool, tokens of the target drug

        Returns:
            Logits [B, T]
        """
        H = self.encoder(token_ids, key_mask)
        weights = drug_mask.to(DTYPE)
        d_bar = (weights[:, :, None] * H).sum(dim=1) / weights.sum(dim=1, keepdim=True).clamp_min(1.0)
        augmented = torch.cat([H, d_bar[:, None, :].expand_as(H)], dim=-1)
        return augmented @ self.head_weight + self.head_bias

    def encode(self, tsent: TokenizedSentence) -> torch.Tensor:
        ids = torch.tensor([self.vocab.encode(t.text for t in tsent.tokens)], dtype=torch.long)
        return self.encoder(ids)[0]


@dataclass
class PredictionResult:
    events: Dict[str, List[Mention]] = field(default_factory=dict)
    scores: Dict[str, List[float]] = field(default_factory=dict)
    drugs: Dict[str, Mention] = field(default_factory=dict)
    report: ComplexityReport = field(default_factory=ComplexityReport)

    def to_annotations(self, sentence_key, provenance: Provenance = Provenance.STUDENT) -> List[AdeAnnotation]:
        return [AdeAnnotation(sentence_key, self.drugs[k], list(v), provenance) for k, v in self.events.items()]


def _span_scores(p: torch.Tensor, tsent: TokenizedSentence, spans: List[Mention]) -> List[float]:
    scores = []
    for span in spans:
        a, b = tsent.token_range(span.start, span.end)
        scores.append(float(p[a:b + 1].mean()))
    return scores


@torch.no_grad()
def predict(tsent: TokenizedSentence, model: UnifiedAdeModel, threshold: float = DEFAULT_THRESHOLD) -> PredictionResult:
    """
    One encoder pass, then pool + head + decode for each of the M drugs.

    Returns:
        PredictionResult keyed by normalized drug surface, with
        encoder_passes = 1 and head_passes = M
    """
    result = PredictionResult(drugs=dict(tsent.drugs))
    result.report.m_drugs = len(tsent.drug_token_spans)
    if tsent.T == 0 or not tsent.drug_token_spans:
        return result

    H = model.encode(tsent)
    result.report.encoder_passes = 1
    for drug_key in tsent.drug_token_spans:
        d_bar = pool_drug(H, tsent.drug_indices(drug_key))
        p = head_forward(H, d_bar, model.head_weight, model.head_bias)
        result.report.head_passes += 1
        spans = decode_spans(p, threshold, tsent.tokens, tsent.sentence.text)
        result.events[drug_key] = spans
        result.scores[drug_key] = _span_scores(p, tsent, spans)
        result.report.n_events += len(spans)
    return result


# -----------------------
# Batching and training
# -----------------------
def collate(examples: Sequence[TrainingExample], vocab: Vocabulary):
    """Pad to the batch's longest sentence; returns (ids, key_mask, drug_mask, labels)"""
    T = max(ex.tsent.T for ex in examples)
    B = len(examples)
    ids = torch.full((B, T), vocab.pad_id, dtype=torch.long)
    key_mask = torch.zeros((B, T), dtype=torch.bool)
    drug_mask = torch.zeros((B, T), dtype=torch.bool)
    labels = torch.zeros((B, T), dtype=DTYPE)
    for row, ex in enumerate(examples):
        n = ex.tsent.T
        ids[row, :n] = torch.tensor(vocab.encode(t.text for t in ex.tsent.tokens), dtype=torch.long)
        key_mask[row, :n] = True
        if ex.drug_indices:
            drug_mask[row, ex.drug_indices] = True
        labels[row, :n] = torch.tensor(ex.labels, dtype=DTYPE)
    return ids, key_mask, drug_mask, labels


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev_strict_f1: Optional[float] = None
    dev_lenient_f1: Optional[float] = None


@dataclass
class TrainResult:
    model: nn.Module
    history: List[EpochRecord]
    step_losses: List[float]
    best_epoch: int


def fit(module: nn.Module, examples: Sequence, loss_on_batch: Callable[[Sequence], torch.Tensor],
        epochs: int, batch_size: int, lr: float, seed: int,
        on_epoch_end: Optional[Callable[[int], Optional[float]]] = None,
        progress: bool = False) -> TrainResult:
    """
    Seeded mini-batch Adam training shared by every model in this module.

    Args:
        on_epoch_end: Called with the epoch number; may return a dev score,
            in which case the best-scoring parameters are restored at the end

    Raises:
        EmptyTrainingSet: no examples
    """
    if not examples:
        raise EmptyTrainingSet("no training examples")
    rng = random.Random(seed)
    params = param_set(module)
    optimizer = None
    order = list(range(len(examples)))
    history, step_losses = [], []
    best_score, best_state, best_epoch = None, None, epochs

    for epoch in range(1, epochs + 1):
        module.train()
        rng.shuffle(order)
        epoch_loss, n_batches = 0.0, 0
        batches = range(0, len(order), batch_size)
        for start in tqdm(batches, desc=f"epoch {epoch}", disable=not progress, leave=False):
            batch = [examples[i] for i in order[start:start + batch_size]]
            module.zero_grad(set_to_none=True)
            loss = loss_on_batch(batch)
            loss.backward()
            grads = {name: p.grad if p.grad is not None else torch.zeros_like(p) for name, p in params.items()}
            optimizer = optimizer_step(params, grads, optimizer, lr)
            step_losses.append(float(loss))
            epoch_loss += float(loss)
            n_batches += 1
        module.eval()
        record = EpochRecord(epoch, epoch_loss / max(1, n_batches))
        dev_score = on_epoch_end(epoch) if on_epoch_end else None
        if isinstance(dev_score, tuple):
            record.dev_strict_f1, record.dev_lenient_f1 = dev_score
            dev_score = record.dev_lenient_f1
        history.append(record)
        logger.info("epoch %d: loss=%.5f dev lenient F1=%s", epoch, record.loss, record.dev_lenient_f1)
        if dev_score is not None and (best_score is None or dev_score > best_score):
            best_score, best_epoch = dev_score, epoch
            best_state = copy.deepcopy(module.state_dict())

    if best_state is not None:
        module.load_state_dict(best_state)
    return TrainResult(module, history, step_losses, best_epoch)


def train(examples: Sequence[TrainingExample], config: ModelConfig, vocab: Vocabulary,
          epochs: int = 10, batch_size: int = 32, lr: float = 1e-3, seed: int = 0,
          dev: Optional[Tuple[Sequence[TokenizedSentence], Sequence[AdeAnnotation]]] = None,
          threshold: float = DEFAULT_THRESHOLD, progress: bool = False) -> TrainResult:
    """
    Train the unified model on (sentence, drug) examples with mean BCE.

    Args:
        examples: Training examples
        config: Encoder configuration (vocab_size must equal len(vocab))
        vocab: Token vocabulary
        dev: Optional (tokenized sentences, gold annotations) used to keep the
            best-dev-F1 parameters

    Returns:
        TrainResult with the trained model and the per-epoch curve
    """
    examples = [ex for ex in examples if ex.tsent.T <= config.max_seq_len]
    if not examples:
        raise EmptyTrainingSet("no training examples")
    model = UnifiedAdeModel.create(sized_config(config, vocab), vocab)

    def _loss(batch):
        ids, key_mask, drug_mask, labels = collate(batch, vocab)
        return bce_with_logits(model(ids, key_mask, drug_mask), labels, key_mask)

    def _dev(_epoch):
        if not dev or not dev[0]:
            return None
        strict, lenient = evaluate_model(model, dev[0], dev[1], threshold)
        return strict.f1, lenient.f1

    return fit(model, examples, _loss, epochs, batch_size, lr, seed, _dev, progress)


def predict_annotations(model: UnifiedAdeModel, tsents: Sequence[TokenizedSentence],
                        threshold: float = DEFAULT_THRESHOLD) -> List[AdeAnnotation]:
    annotations = []
    for tsent in tsents:
        try:
            result = predict(tsent, model, threshold)
        except SequenceTooLong:
            logger.warning("Skipping sentence %s: longer than max_seq_len", tsent.sentence.key)
            continue
        annotations.extend(result.to_annotations(tsent.sentence.key))
    return annotations


def evaluate_model(model, tsents: Sequence[TokenizedSentence], gold: Sequence[AdeAnnotation],
                   threshold: float = DEFAULT_THRESHOLD, predictor: Optional[Callable] = None
                   ) -> Tuple[EvalReport, EvalReport]:
    """Score a model on sentences against gold; returns (strict, lenient)"""
    predictor = predictor or predict_annotations
    keys = {t.sentence.key for t in tsents}
    preds = predictor(model, tsents, threshold)
    gold = [g for g in gold if g.sentence_key in keys]
    return score(preds, gold, MatchMode.STRICT, keys), score(preds, gold, MatchMode.LENIENT, keys)


def build_vocab(tsents: Sequence[TokenizedSentence], min_count: int = 1) -> Vocabulary:
    return Vocabulary.build(([t.text for t in ts.tokens] for ts in tsents), min_count)


def sized_config(config: ModelConfig, vocab: Vocabulary) -> ModelConfig:
    """Encoder config whose embedding table matches the vocabulary"""
    if config.vocab_size == len(vocab):
        return config
    return config.model_copy(update={"vocab_size": len(vocab)})


# -----------------------
# Persistence
# -----------------------
CHECKPOINT_FILE = "checkpoint.ade1"
CONFIG_FILE = "model_config.json"
VOCAB_FILE = "vocab.json"


def save_student(directory: str, model: UnifiedAdeModel) -> Dict[str, str]:
    os.makedirs(directory, exist_ok=True)
    paths = {
        "checkpoint": os.path.join(directory, CHECKPOINT_FILE),
        "config": os.path.join(directory, CONFIG_FILE),
        "vocab": os.path.join(directory, VOCAB_FILE),
    }
    save_checkpoint(paths["checkpoint"], model)
    atomic_write_text(paths["config"], json.dumps(model.config.model_dump(), indent=2, sort_keys=True) + "\n")
    model.vocab.save(paths["vocab"])
    return paths


def load_student(directory: str) -> UnifiedAdeModel:
    config = ModelConfig(**read_json(os.path.join(directory, CONFIG_FILE)))
    vocab = Vocabulary.load(os.path.join(directory, VOCAB_FILE))
    model = UnifiedAdeModel(config, vocab)
    load_checkpoint(os.path.join(directory, CHECKPOINT_FILE), model)
    model.eval()
    return model


# -----------------------
# Pairwise baseline
# -----------------------
class AeTagger(nn.Module):
    """Drug-agnostic adverse-event token classifier (stage 1)"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.encoder = Encoder(config)
        self.classifier = nn.Linear(config.d_model, 1, dtype=DTYPE)

    def forward(self, token_ids, key_mask):
        return self.classifier(self.encoder(token_ids, key_mask)).squeeze(-1)


class RelationClassifier(nn.Module):
    """Binary (event, drug) classifier over a marker-augmented sentence (stage 2)"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.encoder = Encoder(config)
        self.classifier = nn.Linear(2 * config.d_model, 1, dtype=DTYPE)

    def forward(self, token_ids, key_mask, event_mask, drug_mask):
        H = self.encoder(token_ids, key_mask)

        def _pool(mask):
            w = mask.to(DTYPE)
            return (w[:, :, None] * H).sum(dim=1) / w.sum(dim=1, keepdim=True).clamp_min(1.0)

        return self.classifier(torch.cat([_pool(event_mask), _pool(drug_mask)], dim=-1)).squeeze(-1)


def mark_pair(tsent: TokenizedSentence, vocab: Vocabulary, event_range: Tuple[int, int],
              drug_ranges: Sequence[Tuple[int, int]]):
    """
    Insert [E] ... [/E] around the event and [D] ... [/D] around every drug
    occurrence.

    Returns:
        (token ids, event token positions, drug token positions)
    """
    opens, closes = {}, {}
    opens.setdefault(event_range[0], []).append(EVENT_OPEN)
    closes.setdefault(event_range[1], []).append(EVENT_CLOSE)
    for a, b in drug_ranges:
        opens.setdefault(a, []).append(DRUG_OPEN)
        closes.setdefault(b, []).append(DRUG_CLOSE)

    ids, event_pos, drug_pos = [], [], []
    in_drug = [False] * tsent.T
    for a, b in drug_ranges:
        for i in range(a, b + 1):
            in_drug[i] = True
    for i, token in enumerate(tsent.tokens):
        ids.extend(vocab.id_of(m) for m in opens.get(i, ()))
        if event_range[0] <= i <= event_range[1]:
            event_pos.append(len(ids))
        if in_drug[i]:
            drug_pos.append(len(ids))
        ids.append(vocab.id_of(token.text))
        ids.extend(vocab.id_of(m) for m in closes.get(i, ()))
    return ids, event_pos, drug_pos


@dataclass
class RelationExample:
    ids: List[int]
    event_pos: List[int]
    drug_pos: List[int]
    label: int


def _collate_relations(batch: Sequence[RelationExample], pad_id: int):
    T = max(len(ex.ids) for ex in batch)
    B = len(batch)
    ids = torch.full((B, T), pad_id, dtype=torch.long)
    key_mask = torch.zeros((B, T), dtype=torch.bool)
    event_mask = torch.zeros((B, T), dtype=torch.bool)
    drug_mask = torch.zeros((B, T), dtype=torch.bool)
    for row, ex in enumerate(batch):
        ids[row, :len(ex.ids)] = torch.tensor(ex.ids, dtype=torch.long)
        key_mask[row, :len(ex.ids)] = True
        if ex.event_pos:
            event_mask[row, ex.event_pos] = True
        if ex.drug_pos:
            drug_mask[row, ex.drug_pos] = True
    labels = torch.tensor([ex.label for ex in batch], dtype=DTYPE)
    return ids, key_mask, event_mask, drug_mask, labels


@dataclass
class PairwiseBaseline:
    tagger: AeTagger
    relation: RelationClassifier
    vocab: Vocabulary
    config: ModelConfig

    @classmethod
    def create(cls, config: ModelConfig, vocab: Vocabulary) -> "PairwiseBaseline":
        tagger = seeded_module(lambda: AeTagger(config), config.seed)
        relation = seeded_module(lambda: RelationClassifier(config), config.seed + 1)
        return cls(tagger, relation, vocab, config)

    @classmethod
    def train(cls, tsents: Sequence[TokenizedSentence], gold: Sequence[AdeAnnotation], config: ModelConfig,
              vocab: Vocabulary, epochs: int = 10, batch_size: int = 32, lr: float = 1e-3, seed: int = 0,
              progress: bool = False) -> "PairwiseBaseline":
        """Train the event tagger on union labels and the relation classifier on gold pairs"""
        baseline = cls.create(sized_config(config, vocab), vocab)
        gold_by_key: Dict[tuple, List[AdeAnnotation]] = {}
        for ann in gold:
            gold_by_key.setdefault(ann.sentence_key, []).append(ann)

        tag_examples, rel_examples = [], []
        for tsent in tsents:
            if tsent.T > config.max_seq_len:
                continue
            anns = gold_by_key.get(tsent.sentence.key, [])
            all_events = [e for a in anns for e in a.events]
            labels = [1 if any(t.start < e.end and e.start < t.end for e in all_events) else 0 for t in tsent.tokens]
            tag_examples.append(TrainingExample(tsent, "", [], labels))
            by_drug = {normalize_surface(a.drug.surface): {e.span() for e in a.events} for a in anns}
            event_spans = sorted({e.span() for e in all_events})
            for span in event_spans:
                event_range = tsent.token_range(*span)
                if event_range is None:
                    continue
                for drug_key, ranges in tsent.drug_token_spans.items():
                    ids, event_pos, drug_pos = mark_pair(tsent, vocab, event_range, ranges)
                    label = 1 if span in by_drug.get(drug_key, set()) else 0
                    if len(ids) <= config.max_seq_len:
                        rel_examples.append(RelationExample(ids, event_pos, drug_pos, label))

        def _tag_loss(batch):
            ids, key_mask, _, labels = collate(batch, vocab)
            return bce_with_logits(baseline.tagger(ids, key_mask), labels, key_mask)

        def _rel_loss(batch):
            ids, key_mask, event_mask, drug_mask, labels = _collate_relations(batch, vocab.pad_id)
            return bce_with_logits(baseline.relation(ids, key_mask, event_mask, drug_mask), labels)

        fit(baseline.tagger, tag_examples, _tag_loss, epochs, batch_size, lr, seed, progress=progress)
        if rel_examples:
            fit(baseline.relation, rel_examples, _rel_loss, epochs, batch_size, lr, seed + 1, progress=progress)
        return baseline


@torch.no_grad()
def pairwise_baseline_predict(tsent: TokenizedSentence, baseline: PairwiseBaseline,
                              threshold: float = DEFAULT_THRESHOLD,
                              candidates: Optional[Sequence[Mention]] = None) -> PredictionResult:
    """
    Stage 1 proposes N event spans (or uses the given candidates); stage 2
    runs one relation pass for every (event, drug) pair: N * M units.
    """
    result = PredictionResult(drugs=dict(tsent.drugs))
    result.report.m_drugs = len(tsent.drug_token_spans)
    for drug_key in tsent.drug_token_spans:
        result.events[drug_key] = []
        result.scores[drug_key] = []
    if tsent.T == 0:
        return result

    vocab = baseline.vocab
    if candidates is None:
        ids = torch.tensor([vocab.encode(t.text for t in tsent.tokens)], dtype=torch.long)
        p = squash(baseline.tagger(ids, torch.ones_like(ids, dtype=torch.bool))[0])
        result.report.encoder_passes += 1
        candidates = decode_spans(p, threshold, tsent.tokens, tsent.sentence.text)
    result.report.n_events = len(candidates)

    for span in candidates:
        event_range = tsent.token_range(span.start, span.end)
        if event_range is None:
            continue
        for drug_key, ranges in tsent.drug_token_spans.items():
            ids, event_pos, drug_pos = mark_pair(tsent, vocab, event_range, ranges)
            batch = _collate_relations([RelationExample(ids, event_pos, drug_pos, 0)], vocab.pad_id)
            prob = float(squash(baseline.relation(*batch[:4]))[0])
            result.report.encoder_passes += 1
            result.report.pairwise_units += 1
            if prob >= threshold:
                result.events[drug_key].append(span)
                result.scores[drug_key].append(prob)
    return result


def pairwise_predict_annotations(baseline: PairwiseBaseline, tsents: Sequence[TokenizedSentence],
                                 threshold: float = DEFAULT_THRESHOLD) -> List[AdeAnnotation]:
    annotations = []
    for tsent in tsents:
        try:
            result = pairwise_baseline_predict(tsent, baseline, threshold)
        except SequenceTooLong:
            logger.warning("Skipping sentence %s: longer than max_seq_len", tsent.sentence.key)
            continue
        annotations.extend(result.to_annotations(tsent.sentence.key))
    return annotations
