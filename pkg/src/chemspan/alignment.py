"""Mapping gold character annotations onto token spans, and loss accounting.

A gold entity is recoverable when some token starts exactly at its first
character and some same-or-later token ends exactly at its last. Entities
that start or end mid-token, or that cross a sentence boundary, cannot be
represented by any token span; they and every relation touching them are
counted here once, up front, so downstream recall denominators stay honest.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .corpus import Document, GoldEntity, Sentence, segment
from .tokenizer import Token, tokenize_sentence

REASON_UNALIGNABLE = "unalignable"
REASON_CROSS_SENTENCE = "cross-sentence"
REASON_LOST_ARGUMENT = "lost-argument"
REASON_CROSS_SENTENCE_PAIR = "cross-sentence-pair"


@dataclass(frozen=True)
class AlignedEntity:
    entity_id: str
    etype: str
    recoverable: bool
    token_start: Optional[int] = None  # sentence-relative, inclusive
    token_end: Optional[int] = None
    reason: str = ""


def align_entity(entity: GoldEntity, tokens: Sequence[Token]) -> AlignedEntity:
    """Align one gold entity against the tokens of its sentence.

    Token offsets must be document-absolute (see tokenize_sentence). The
    aligned span is minimal: the unique token starting at char_start through
    the first token ending at char_end.
    """
    start_idx = None
    for i, tok in enumerate(tokens):
        if tok.char_start == entity.char_start:
            start_idx = i
            break
        if tok.char_start > entity.char_start:
            break
    if start_idx is None:
        return AlignedEntity(entity.entity_id, entity.etype, False, reason=REASON_UNALIGNABLE)
    for j in range(start_idx, len(tokens)):
        if tokens[j].char_end == entity.char_end:
            return AlignedEntity(entity.entity_id, entity.etype, True, start_idx, j)
        if tokens[j].char_end > entity.char_end:
            break
    return AlignedEntity(entity.entity_id, entity.etype, False, reason=REASON_UNALIGNABLE)


@dataclass
class DocView:
    """A document with its segmentation and per-sentence tokens precomputed.

    flat_surfaces concatenates every sentence's token surfaces in document
    order; sent_flat_start[k] is where sentence k begins in that flat list,
    which is what the context windowing code slices against.
    """

    doc: Document
    sentences: List[Sentence]
    tokens: List[List[Token]]  # per sentence
    flat_surfaces: List[str]
    sent_flat_start: List[int]

    @classmethod
    def build(cls, doc: Document, segmenter=None) -> "DocView":
        sentences = segment(doc, segmenter)
        tokens = [tokenize_sentence(doc, s) for s in sentences]
        flat: List[str] = []
        starts: List[int] = []
        for toks in tokens:
            starts.append(len(flat))
            flat.extend(t.surface for t in toks)
        return cls(doc, sentences, tokens, flat, starts)

    def sentence_of_entity(self, entity: GoldEntity) -> Optional[int]:
        for k, s in enumerate(self.sentences):
            if s.char_start <= entity.char_start and entity.char_end <= s.char_end:
                return k
        return None

    def context(self, sent_idx: int) -> Tuple[List[str], List[str]]:
        """Token surfaces before and after sentence ``sent_idx``, in order."""
        lo = self.sent_flat_start[sent_idx]
        hi = lo + len(self.tokens[sent_idx])
        return self.flat_surfaces[:lo], self.flat_surfaces[hi:]


@dataclass
class LossReport:
    """Counts of gold annotations no token-span system can recover."""

    entities_total: int = 0
    entities_lost: int = 0
    relations_total: int = 0
    relations_lost: int = 0
    lost_entity_ids: List[Tuple[str, str, str]] = field(default_factory=list)
    lost_relation_keys: List[Tuple[str, str, str, str, str]] = field(default_factory=list)
    entities_lost_by_type: Dict[str, int] = field(default_factory=dict)
    relations_lost_by_group: Dict[str, int] = field(default_factory=dict)

    @property
    def entity_loss_rate(self) -> float:
        return self.entities_lost / self.entities_total if self.entities_total else 0.0

    @property
    def relation_loss_rate(self) -> float:
        return self.relations_lost / self.relations_total if self.relations_total else 0.0


def align_document(view: DocView) -> Dict[str, Tuple[Optional[int], AlignedEntity]]:
    """Align every gold entity of a document.

    Returns entity_id -> (sentence index or None, AlignedEntity). A None
    sentence index means the entity crosses a sentence boundary, which is
    recorded with its own reason tag.
    """
    out: Dict[str, Tuple[Optional[int], AlignedEntity]] = {}
    for entity in view.doc.entities:
        k = view.sentence_of_entity(entity)
        if k is None:
            out[entity.entity_id] = (None, AlignedEntity(
                entity.entity_id, entity.etype, False, reason=REASON_CROSS_SENTENCE))
        else:
            out[entity.entity_id] = (k, align_entity(entity, view.tokens[k]))
    return out


def compute_loss_report(docs: Sequence[Document], segmenter=None) -> LossReport:
    """Tokenization/segmentation loss over a corpus.

    Relations are counted over the evaluated relation classes only, since
    those are the ones a scorer will ever ask about. A relation is lost when
    either argument is lost or the arguments sit in different sentences.
    """
    report = LossReport()
    for doc in docs:
        view = DocView.build(doc, segmenter)
        aligned = align_document(view)
        for entity in doc.entities:
            report.entities_total += 1
            k, a = aligned[entity.entity_id]
            if not a.recoverable:
                report.entities_lost += 1
                report.lost_entity_ids.append((doc.doc_id, entity.entity_id, a.reason))
                report.entities_lost_by_type[entity.etype] = \
                    report.entities_lost_by_type.get(entity.etype, 0) + 1
        for rel in doc.relations:
            if not rel.eval_flag:
                continue
            report.relations_total += 1
            k1, a1 = aligned[rel.arg1]
            k2, a2 = aligned[rel.arg2]
            if not (a1.recoverable and a2.recoverable):
                reason = REASON_LOST_ARGUMENT
            elif k1 != k2:
                reason = REASON_CROSS_SENTENCE_PAIR
            else:
                continue
            report.relations_lost += 1
            report.lost_relation_keys.append(
                (doc.doc_id, rel.arg1, rel.arg2, rel.cpr_group, reason))
            report.relations_lost_by_group[rel.cpr_group] = \
                report.relations_lost_by_group.get(rel.cpr_group, 0) + 1
    return report


def render_loss_report(report: LossReport) -> str:
    """Line-delimited key-value form, stable ordering."""
    lines = [
        f"entities_total\t{report.entities_total}",
        f"entities_lost\t{report.entities_lost}",
        f"entity_loss_rate\t{report.entity_loss_rate:.6f}",
        f"relations_total\t{report.relations_total}",
        f"relations_lost\t{report.relations_lost}",
        f"relation_loss_rate\t{report.relation_loss_rate:.6f}",
    ]
    for etype in sorted(report.entities_lost_by_type):
        lines.append(f"entities_lost[{etype}]\t{report.entities_lost_by_type[etype]}")
    for group in sorted(report.relations_lost_by_group):
        lines.append(f"relations_lost[{group}]\t{report.relations_lost_by_group[group]}")
    return "\n".join(lines) + "\n"


def render_lost_items(report: LossReport) -> str:
    """Machine-readable record of every lost item, one per line."""
    lines = []
    for doc_id, entity_id, reason in report.lost_entity_ids:
        lines.append(f"entity\t{doc_id}\t{entity_id}\t{reason}")
    for doc_id, arg1, arg2, group, reason in report.lost_relation_keys:
        lines.append(f"relation\t{doc_id}\t{arg1}\t{arg2}\t{group}\t{reason}")
    return "".join(line + "\n" for line in lines)


def parse_loss_report(text: str) -> LossReport:
    report = LossReport()
    for line in text.splitlines():
        if not line.strip():
            continue
        key, value = line.split("\t")
        if key == "entities_total":
            report.entities_total = int(value)
        elif key == "entities_lost":
            report.entities_lost = int(value)
        elif key == "relations_total":
            report.relations_total = int(value)
        elif key == "relations_lost":
            report.relations_lost = int(value)
        elif key.startswith("entities_lost["):
            report.entities_lost_by_type[key[len("entities_lost["):-1]] = int(value)
        elif key.startswith("relations_lost["):
            report.relations_lost_by_group[key[len("relations_lost["):-1]] = int(value)
    return report


def parse_lost_items(text: str) -> Tuple[List[Tuple[str, str, str]], List[Tuple[str, str, str, str, str]]]:
    entities, relations = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        cols = line.split("\t")
        if cols[0] == "entity":
            entities.append((cols[1], cols[2], cols[3]))
        elif cols[0] == "relation":
            relations.append((cols[1], cols[2], cols[3], cols[4], cols[5]))
    return entities, relations
