"""Strict micro precision/recall/F1 for entity and relation predictions.

Match identity is a character-offset key, never a token key, so scores do
not depend on the tokenizer and stay comparable across systems: entities
are (doc_id, char_start, char_end, type) and relations are
(doc_id, subj_start, subj_end, obj_start, obj_end, label) with the subject
always the chemical. A prediction counts only when its whole key matches.

Gold items that tokenization can never recover still belong in the recall
denominator. Callers either leave them in the gold set (where they fail to
match and become false negatives on their own) or score against the
recoverable gold only and pass the structural loss counts here; both roads
produce the same totals.
"""

from dataclasses import dataclass, field as dataclass_field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .corpus import Document, is_eval_group
from .errors import ContractViolationError
from .ner import SpanMention
from .relation import RelationPrediction

EntityKey = Tuple[str, int, int, str]
RelationKey = Tuple[str, int, int, int, int, str]

TASK_NER = "NER"
TASK_RE = "RE"


def format_fraction(value: float) -> str:
    """Three decimal places, ties away from zero: 0.0625 -> '0.063'."""
    return str(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def _prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class TypeScore:
    tp: int
    fp: int
    fn: int     # includes lost
    lost: int
    precision: float
    recall: float
    f1: float


@dataclass
class ScoreReport:
    """Micro-averaged counts and metrics, with a per-type breakdown.

    ``fn`` already includes ``lost``; conservation therefore reads
    tp + fn == |gold| + lost and tp + fp == |predicted|.
    ``no_predictions`` flags the precision-is-zero-by-convention case so a
    0.0 from an empty prediction set is never mistaken for a measured 0.0.
    """

    task: str
    tp: int
    fp: int
    fn: int
    lost: int
    precision: float
    recall: float
    f1: float
    per_type: Dict[str, TypeScore]
    no_predictions: bool
    seeds_aggregated: int = 1
    per_seed_counts: Tuple[Tuple[int, int, int, int], ...] = ()

    def to_record(self) -> dict:
        record = {
            "task": self.task,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "lost": self.lost,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "no_predictions": self.no_predictions,
            "seeds_aggregated": self.seeds_aggregated,
            "per_type": {
                name: {"tp": t.tp, "fp": t.fp, "fn": t.fn, "lost": t.lost,
                       "precision": t.precision, "recall": t.recall, "f1": t.f1}
                for name, t in sorted(self.per_type.items())
            },
        }
        if self.per_seed_counts:
            record["per_seed_counts"] = [list(c) for c in self.per_seed_counts]
        return record


def _score_sets(task: str, gold: Set, predicted: Set,
                lost_by_type: Mapping[str, int]) -> ScoreReport:
    types = sorted({k[-1] for k in gold} | {k[-1] for k in predicted} | set(lost_by_type))
    per_type = {}
    for name in types:
        g = {k for k in gold if k[-1] == name}
        p = {k for k in predicted if k[-1] == name}
        lost = int(lost_by_type.get(name, 0))
        tp, fp, fn = len(g & p), len(p - g), len(g - p) + lost
        per_type[name] = TypeScore(tp, fp, fn, lost, *_prf(tp, fp, fn))
    lost = sum(int(v) for v in lost_by_type.values())
    tp = len(gold & predicted)
    fp = len(predicted - gold)
    fn = len(gold - predicted) + lost
    precision, recall, f1 = _prf(tp, fp, fn)
    return ScoreReport(task, tp, fp, fn, lost, precision, recall, f1,
                       per_type, no_predictions=not predicted)


def score_ner(gold: Iterable[EntityKey], predicted: Iterable[EntityKey],
              lost_by_type: Optional[Mapping[str, int]] = None) -> ScoreReport:
    """Exact-match entity scoring over character-offset keys.

    Both sides are treated as sets, so duplicate predictions neither help
    nor hurt. ``lost_by_type`` carries structurally unrecoverable gold
    counts that are not present in ``gold``; they land in fn.
    """
    return _score_sets(TASK_NER, set(gold), set(predicted), lost_by_type or {})


def score_re(gold: Iterable[RelationKey], predicted: Iterable[RelationKey],
             lost_by_group: Optional[Mapping[str, int]] = None) -> ScoreReport:
    """Exact-match relation scoring; labels must be evaluated classes.

    A non-evaluated label on either side is a pipeline bug, not a scoring
    outcome, so it is rejected loudly.
    """
    gold = set(gold)
    predicted = set(predicted)
    for side, items in (("gold", gold), ("predicted", predicted)):
        for key in items:
            if not is_eval_group(key[-1]):
                raise ContractViolationError(
                    f"{side} relation carries non-evaluated label {key[-1]!r}: {key}")
    return _score_sets(TASK_RE, gold, predicted, lost_by_group or {})


def aggregate_seeds(reports: Sequence[ScoreReport]) -> ScoreReport:
    """Arithmetic mean of precision/recall/F1 across seeds.

    Metrics are averaged, never recomputed from pooled counts; the raw
    per-seed counts ride along so nothing is hidden. Count fields hold the
    per-seed means (floats unless every seed agreed).
    """
    if not reports:
        raise ValueError("cannot aggregate an empty list of score reports")
    tasks = {r.task for r in reports}
    if len(tasks) != 1:
        raise ValueError(f"cannot aggregate mixed tasks {sorted(tasks)}")
    n = len(reports)

    def mean(values):
        total = sum(values)
        return total // n if total % n == 0 else total / n

    type_names = sorted({name for r in reports for name in r.per_type})
    zero = TypeScore(0, 0, 0, 0, 0.0, 0.0, 0.0)
    per_type = {}
    for name in type_names:
        rows = [r.per_type.get(name, zero) for r in reports]
        per_type[name] = TypeScore(
            mean([t.tp for t in rows]), mean([t.fp for t in rows]),
            mean([t.fn for t in rows]), mean([t.lost for t in rows]),
            sum(t.precision for t in rows) / n, sum(t.recall for t in rows) / n,
            sum(t.f1 for t in rows) / n)
    return ScoreReport(
        reports[0].task,
        mean([r.tp for r in reports]), mean([r.fp for r in reports]),
        mean([r.fn for r in reports]), mean([r.lost for r in reports]),
        sum(r.precision for r in reports) / n,
        sum(r.recall for r in reports) / n,
        sum(r.f1 for r in reports) / n,
        per_type,
        no_predictions=all(r.no_predictions for r in reports),
        seeds_aggregated=n,
        per_seed_counts=tuple((r.tp, r.fp, r.fn, r.lost) for r in reports))


# ---------------------------------------------------------------------------
# key builders


def gold_entity_set(docs: Sequence[Document]) -> Set[EntityKey]:
    return {(doc.doc_id, e.char_start, e.char_end, e.etype)
            for doc in docs for e in doc.entities}


def gold_relation_set(docs: Sequence[Document]) -> Set[RelationKey]:
    """Evaluated gold relations as character-offset keys (chemical first)."""
    out: Set[RelationKey] = set()
    for doc in docs:
        for rel in doc.relations:
            if not rel.eval_flag:
                continue
            chem = doc.entity_by_id(rel.arg1)
            gene = doc.entity_by_id(rel.arg2)
            out.add((doc.doc_id, chem.char_start, chem.char_end,
                     gene.char_start, gene.char_end, rel.cpr_group))
    return out


def predicted_entity_set(mentions: Iterable[SpanMention]) -> Set[EntityKey]:
    return {(m.doc_id, m.char_start, m.char_end, m.etype) for m in mentions}


def predicted_relation_set(predictions: Iterable[RelationPrediction]) -> Set[RelationKey]:
    return {(p.doc_id, p.subject.char_start, p.subject.char_end,
             p.object.char_start, p.object.char_end, p.label) for p in predictions}


# ---------------------------------------------------------------------------
# rendering


def render_score_report(report: ScoreReport) -> str:
    def fmt(value):
        return format_fraction(value) if isinstance(value, float) else str(value)

    lines = [f"task\t{report.task}"]
    if report.seeds_aggregated > 1:
        lines.append(f"seeds\t{report.seeds_aggregated}")
    lines.append(f"counts\ttp={fmt(report.tp)} fp={fmt(report.fp)} "
                 f"fn={fmt(report.fn)} lost={fmt(report.lost)}")
    lines.append(f"precision\t{format_fraction(report.precision)}")
    lines.append(f"recall\t{format_fraction(report.recall)}")
    lines.append(f"f1\t{format_fraction(report.f1)}")
    if report.no_predictions:
        lines.append("note\tprecision is 0 by convention: no predictions were made")
    for name, t in sorted(report.per_type.items()):
        lines.append(f"type[{name}]\ttp={fmt(t.tp)} fp={fmt(t.fp)} fn={fmt(t.fn)} "
                     f"lost={fmt(t.lost)} P={format_fraction(t.precision)} "
                     f"R={format_fraction(t.recall)} F={format_fraction(t.f1)}")
    if report.per_seed_counts:
        for i, (tp, fp, fn, lost) in enumerate(report.per_seed_counts):
            lines.append(f"seed[{i}]\ttp={tp} fp={fp} fn={fn} lost={lost}")
    return "\n".join(lines) + "\n"
