"""
End-to-end ADE Evaluation
Strict and lenient (drug, event) scoring, 8:1:1 splitting, k-fold cross
validation and the low-resource learning-curve harness.

An ADE counts as correct only when its event span matches (exactly, or by
overlap in lenient mode) and it is attached to the right drug. Repeated
mentions of one drug in a sentence count as that drug's first mention, the
one the student attaches its predictions to.
"""

from __future__ import annotations

import logging
import random
import statistics
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from modules.drug_lexicon import normalize_surface
from modules.schema import SentenceSetMismatch, TooFewItems

logger = logging.getLogger(__name__)

Span = Tuple[int, int]


class MatchMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    mode: MatchMode
    precision: float = field(init=False)
    recall: float = field(init=False)
    f1: float = field(init=False)

    def __post_init__(self):
        self.precision = self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0
        self.recall = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        p, r = self.precision, self.recall
        self.f1 = 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        record = asdict(self)
        record["mode"] = self.mode.value
        return record


# -----------------------
# Triples
# -----------------------
def _triples(annotations) -> Dict[tuple, set]:
    """(sentence_key, normalized drug surface) -> set of event spans; duplicates collapse"""
    grouped: Dict[tuple, set] = {}
    for ann in annotations:
        bucket = grouped.setdefault((ann.sentence_key, normalize_surface(ann.drug.surface)), set())
        for event in ann.events:
            bucket.add(event.span())
    return grouped


def _overlap(a: Span, b: Span) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def spans_match(pred: Span, gold: Span, mode: MatchMode) -> bool:
    if MatchMode(mode) is MatchMode.STRICT:
        return pred == gold
    return _overlap(pred, gold) >= 1


def _match_group(preds: List[Span], golds: List[Span], mode: MatchMode) -> int:
    """
    One-to-one matching of predicted to gold event spans.

    Predictions are taken in ascending start order and prefer the compatible
    gold with the larger overlap; an augmenting-path step reassigns earlier
    choices whenever that lets one more prediction match, so the count is
    always the maximum possible.
    """
    preds = sorted(preds)
    golds = sorted(golds)
    candidates = [
        sorted((g for g in range(len(golds)) if spans_match(p, golds[g], mode)),
               key=lambda g, p=p: (-_overlap(p, golds[g]), golds[g]))
        for p in preds
    ]
    owner: Dict[int, int] = {}

    def _augment(i: int, visited: set) -> bool:
        for g in candidates[i]:
            if g in visited:
                continue
            visited.add(g)
            if g not in owner or _augment(owner[g], visited):
                owner[g] = i
                return True
        return False

    return sum(1 for i in range(len(preds)) if _augment(i, set()))


def _check_sentence_set(preds, golds, sentence_keys):
    if sentence_keys is None:
        return
    allowed = set(sentence_keys)
    stray = {a.sentence_key for a in (*preds, *golds)} - allowed
    if stray:
        raise SentenceSetMismatch(f"{len(stray)} annotations reference sentences outside the evaluated set")


def score(preds, golds, mode: MatchMode, sentence_keys: Optional[Iterable] = None) -> EvalReport:
    """
    Micro-averaged end-to-end scoring of (sentence, drug, event) triples.

    Args:
        preds: Predicted AdeAnnotations
        golds: Gold AdeAnnotations
        mode: STRICT (exact span) or LENIENT (any overlap)
        sentence_keys: The evaluated sentence set; when given, every
            annotation must reference one of them

    Raises:
        SentenceSetMismatch: an annotation references an unknown sentence
    """
    preds, golds = list(preds), list(golds)
    _check_sentence_set(preds, golds, sentence_keys)
    mode = MatchMode(mode)
    pred_groups, gold_groups = _triples(preds), _triples(golds)

    tp = fp = fn = 0
    for group in set(pred_groups) | set(gold_groups):
        p = list(pred_groups.get(group, ()))
        g = list(gold_groups.get(group, ()))
        matched = _match_group(p, g, mode)
        tp += matched
        fp += len(p) - matched
        fn += len(g) - matched
    return EvalReport(tp, fp, fn, mode)


def oracle_score(preds, golds, mode: MatchMode) -> EvalReport:
    """Brute-force reference: enumerate every one-to-one matching per group"""
    mode = MatchMode(mode)
    pred_groups, gold_groups = _triples(preds), _triples(golds)

    def _best(p: List[Span], g: List[Span], used: frozenset) -> int:
        if not p:
            return 0
        head, rest = p[0], p[1:]
        best = _best(rest, g, used)
        for j, gold in enumerate(g):
            if j not in used and spans_match(head, gold, mode):
                best = max(best, 1 + _best(rest, g, used | {j}))
        return best

    tp = fp = fn = 0
    for group in set(pred_groups) | set(gold_groups):
        p = sorted(pred_groups.get(group, ()))
        g = sorted(gold_groups.get(group, ()))
        matched = _best(p, g, frozenset())
        tp += matched
        fp += len(p) - matched
        fn += len(g) - matched
    return EvalReport(tp, fp, fn, mode)


# -----------------------
# Splits
# -----------------------
def split_8_1_1(items: Sequence, seed: int):
    """Seeded shuffle, then train = floor(0.8n), dev = floor(0.1n), test = rest"""
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    n_train = n * 8 // 10
    n_dev = n // 10
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]


def kfold(items: Sequence, k: int = 10, seed: int = 0) -> List[Tuple[list, list]]:
    """
    Seeded k-fold partition; the first n mod k folds hold one extra item.

    Returns:
        [(train_i, test_i)] with test_i = fold i and train_i = all other folds

    Raises:
        TooFewItems: k < 2 or fewer items than folds
    """
    n = len(items)
    if k < 2 or n < k:
        raise TooFewItems(f"cannot make {k} folds from {n} items")
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    base, extra = divmod(n, k)
    folds, pos = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(shuffled[pos:pos + size])
        pos += size
    return [
        ([x for j, fold in enumerate(folds) if j != i for x in fold], folds[i])
        for i in range(k)
    ]


# -----------------------
# Harnesses
# -----------------------
@dataclass
class CurveRow:
    size: int
    seed: int
    f1: float
    strict_f1: float = 0.0
    reference_f1: Optional[float] = None


def learning_curve(train: Sequence, dev: Sequence, test: Sequence, sizes: Iterable[int], seed: int,
                   train_fn: Callable, eval_fn: Callable, reference_f1: Optional[float] = None) -> List[CurveRow]:
    """
    Train on growing, nested subsets of train and report test F1.

    Args:
        train/dev/test: Items understood by train_fn and eval_fn
        sizes: Training-set sizes, each within [1, len(train)]
        seed: Controls the nested subset order
        train_fn: (train_items, dev_items, seed) -> model
        eval_fn: (model, test_items) -> (strict EvalReport, lenient EvalReport)
        reference_f1: Optional distilled-model F1 repeated on every row

    Returns:
        One CurveRow per size, ascending; lenient F1 in .f1
    """
    sizes = sorted(set(sizes))
    for size in sizes:
        if not 1 <= size <= len(train):
            raise ValueError(f"training size {size} outside [1, {len(train)}]")
    order = list(train)
    random.Random(seed).shuffle(order)

    rows = []
    for size in sizes:
        model = train_fn(order[:size], dev, seed)
        strict, lenient = eval_fn(model, test)
        logger.info("learning curve: size=%d seed=%d lenient F1=%.4f", size, seed, lenient.f1)
        rows.append(CurveRow(size=size, seed=seed, f1=lenient.f1, strict_f1=strict.f1, reference_f1=reference_f1))
    return rows


@dataclass
class CrossValResult:
    strict: List[EvalReport]
    lenient: List[EvalReport]

    @staticmethod
    def _summary(reports: List[EvalReport]) -> dict:
        f1s = [r.f1 for r in reports]
        return {
            "mean_f1": statistics.fmean(f1s),
            "std_f1": statistics.pstdev(f1s) if len(f1s) > 1 else 0.0,
            "folds": [r.to_dict() for r in reports],
        }

    def to_dict(self) -> dict:
        return {"strict": self._summary(self.strict), "lenient": self._summary(self.lenient)}


def crossval(items: Sequence, k: int, seed: int, train_fn: Callable, eval_fn: Callable) -> CrossValResult:
    """k-fold protocol: train on k-1 folds (no dev set), score the held-out fold"""
    strict, lenient = [], []
    for i, (train_items, test_items) in enumerate(kfold(items, k, seed)):
        model = train_fn(train_items, [], seed + i)
        s, l = eval_fn(model, test_items)
        logger.info("fold %d/%d: strict F1=%.4f lenient F1=%.4f", i + 1, k, s.f1, l.f1)
        strict.append(s)
        lenient.append(l)
    return CrossValResult(strict, lenient)


# -----------------------
# Rendering
# -----------------------
def render_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Aligned-column text table"""
    def _cell(value) -> str:
        return f"{value:.4f}" if isinstance(value, float) else str(value)

    cells = [[_cell(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def reports_table(named_reports: Sequence[Tuple[str, EvalReport]]) -> str:
    headers = ["name", "mode", "tp", "fp", "fn", "precision", "recall", "f1"]
    rows = [[name, r.mode.value, r.tp, r.fp, r.fn, r.precision, r.recall, r.f1] for name, r in named_reports]
    return render_table(headers, rows)
