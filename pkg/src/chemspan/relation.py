"""Relation classification over typed entity-marker sequences.

Every CHEMICAL x GENE mention pair in a sentence becomes one instance: the
sentence is rewritten with four marker symbols around the two spans, a
sequence-start symbol and cross-sentence context are added, and the encoder
output is pooled into one of six representation layouts (A..F) feeding a
two-layer ReLU head over {null, CPR:3, CPR:4, CPR:5, CPR:6, CPR:9}.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .alignment import DocView, align_document
from .config import PipelineConfig
from .corpus import Document, is_eval_group
from .encoder import (
    CLS_SYMBOL,
    OBJ_CLOSE,
    OBJ_OPEN,
    SUBJ_CLOSE,
    SUBJ_OPEN,
    Adam,
    TinyEncoder,
)
from .errors import TrainingDivergedError
from .ner import NerModel, SpanMention, build_windowed_input

log = logging.getLogger(__name__)

RELATION_LABELS = ("null", "CPR:3", "CPR:4", "CPR:5", "CPR:6", "CPR:9")
NULL_RELATION = 0

# representation layouts: which pooled pieces are concatenated, in order
_VARIANT_SEGMENTS = {
    "A": ("s_open", "o_open"),
    "B": ("cls", "s_open", "o_open"),
    "C": ("s_open", "mid", "o_open"),
    "D": ("cls", "s_open", "mid", "o_open"),
    "E": ("s_open", "s_close", "mid", "o_open", "o_close"),
    "F": ("cls", "s_open", "s_close", "mid", "o_open", "o_close"),
}


def representation_width(variant: str, dim: int) -> int:
    if variant not in _VARIANT_SEGMENTS:
        raise ValueError(f"unknown representation variant {variant!r}; expected A..F")
    return len(_VARIANT_SEGMENTS[variant]) * dim


def generate_pairs(mentions: Sequence[SpanMention]) -> List[Tuple[SpanMention, SpanMention]]:
    """All chemical-gene pairs within one sentence's mentions.

    Nested and overlapping pairs are included on purpose. Ordered by
    (subject token start, object token start) for determinism.
    """
    chems = sorted((m for m in mentions if m.etype == "CHEMICAL"),
                   key=lambda m: (m.token_start, m.token_end))
    genes = sorted((m for m in mentions if m.etype == "GENE"),
                   key=lambda m: (m.token_start, m.token_end))
    return [(c, g) for c in chems for g in genes]


@dataclass(frozen=True)
class MarkedSentence:
    symbols: Tuple[str, ...]
    subj_open: int
    subj_close: int
    obj_open: int
    obj_close: int
    token_map: Tuple[int, ...]  # original token index -> marked position

    @property
    def marker_positions(self) -> Tuple[int, int, int, int]:
        return (self.subj_open, self.subj_close, self.obj_open, self.obj_close)


def insert_markers(tokens: Sequence[str], subject: Tuple[int, int],
                   object_: Tuple[int, int]) -> MarkedSentence:
    """Wrap the subject and object token spans in typed marker symbols.

    Spans are inclusive token index pairs. Insertion events are ordered by
    position; at equal positions openings come before closings, the span
    that starts earlier (or at a tie ends later) opens first, and closings
    mirror the opening order, so nested spans produce nested brackets. The
    object opens first when both spans are identical.
    """
    n = len(tokens)
    for name, (start, end) in (("subject", subject), ("object", object_)):
        if not (0 <= start <= end < n):
            raise ValueError(f"{name} span [{start},{end}] outside sentence of {n} tokens")
    s_start, s_end = subject
    o_start, o_end = object_
    events = [
        # (insert position, close?, tie key, symbol, slot)
        (s_start, 0, (s_start, -s_end, 1), SUBJ_OPEN, "subj_open"),
        (o_start, 0, (o_start, -o_end, 0), OBJ_OPEN, "obj_open"),
        (s_end + 1, 1, (-s_start, s_end, 0), SUBJ_CLOSE, "subj_close"),
        (o_end + 1, 1, (-o_start, o_end, 1), OBJ_CLOSE, "obj_close"),
    ]
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    out: List[str] = []
    slots: Dict[str, int] = {}
    token_map: List[int] = []
    ei = 0
    for i in range(n + 1):
        while ei < len(events) and events[ei][0] == i:
            slots[events[ei][4]] = len(out)
            out.append(events[ei][3])
            ei += 1
        if i < n:
            token_map.append(len(out))
            out.append(tokens[i])
    return MarkedSentence(tuple(out), slots["subj_open"], slots["subj_close"],
                          slots["obj_open"], slots["obj_close"], tuple(token_map))


def strip_markers(symbols: Sequence[str]) -> List[str]:
    markers = {SUBJ_OPEN, SUBJ_CLOSE, OBJ_OPEN, OBJ_CLOSE}
    return [s for s in symbols if s not in markers]


def middle_token_range(subject: Tuple[int, int], object_: Tuple[int, int]) -> Tuple[int, int]:
    """Original token indices strictly between the two spans, as [lo, hi]."""
    lo = min(subject[1], object_[1]) + 1
    hi = max(subject[0], object_[0]) - 1
    return lo, hi


@dataclass
class RelationInstance:
    """One candidate pair, fully assembled for the encoder."""

    doc_id: str
    sent_id: int
    subject: SpanMention
    object: SpanMention
    symbols: List[str]       # [CLS] + left context + marked sentence + right context
    marker_positions: Tuple[int, int, int, int]  # positions within symbols
    middle_positions: List[int]                  # positions within symbols
    label: Optional[int] = None


class RelationModel:
    """Typed-marker relation classifier over a trainable encoder."""

    def __init__(self, config: Optional[PipelineConfig] = None, seed: int = 0):
        self.config = config or PipelineConfig()
        self.seed = seed
        ec = self.config.encoder
        rc = self.config.relation
        if rc.variant not in _VARIANT_SEGMENTS:
            raise ValueError(f"unknown representation variant {rc.variant!r}; expected A..F")
        self.encoder = TinyEncoder(ec.dim, ec.blocks, ec.ffn_dim, ec.buckets,
                                   ec.max_len, seed=seed)
        rng = np.random.default_rng(seed + 202)
        rep_dim = representation_width(rc.variant, ec.dim)
        self.head = {
            "re.w1": rng.normal(0.0, rep_dim ** -0.5, (rep_dim, rc.head_hidden)),
            "re.b1": np.zeros(rc.head_hidden),
            "re.w2": rng.normal(0.0, rc.head_hidden ** -0.5,
                                (rc.head_hidden, len(RELATION_LABELS))),
            "re.b2": np.zeros(len(RELATION_LABELS)),
        }

    def parameters(self) -> Dict[str, np.ndarray]:
        merged = dict(self.encoder.params)
        merged.update(self.head)
        return merged

    def zero_grads(self) -> Dict[str, np.ndarray]:
        grads = self.encoder.zero_grads()
        grads.update({k: np.zeros_like(v) for k, v in self.head.items()})
        return grads

    # -- instance assembly ----------------------------------------------------

    def build_instance(self, doc_id: str, sent_id: int, sent_surfaces: Sequence[str],
                       left_context: Sequence[str], right_context: Sequence[str],
                       subject: SpanMention, object_: SpanMention,
                       label: Optional[int] = None) -> RelationInstance:
        """Markers into the sentence, then context, then the start symbol.

        Markers never extend into context: they wrap sentence tokens only,
        and the context windows sit outside the marked sentence.
        """
        rc = self.config.relation
        ec = self.config.encoder
        marked = insert_markers(sent_surfaces,
                                (subject.token_start, subject.token_end),
                                (object_.token_start, object_.token_end))
        # 4 markers are already inside `marked`; reserve 1 for the start symbol
        windowed = build_windowed_input(marked.symbols, left_context, right_context,
                                        rc.context_window, ec.max_len, reserved=1)
        shift = windowed.sent_offset + 1  # +1 for the start symbol
        symbols = [CLS_SYMBOL] + windowed.symbols
        lo, hi = middle_token_range((subject.token_start, subject.token_end),
                                    (object_.token_start, object_.token_end))
        middle = [marked.token_map[i] + shift for i in range(lo, hi + 1)] if lo <= hi else []
        return RelationInstance(
            doc_id, sent_id, subject, object_, symbols,
            tuple(p + shift for p in marked.marker_positions), middle, label)

    # -- representation -------------------------------------------------------

    def _segments(self):
        return _VARIANT_SEGMENTS[self.config.relation.variant]

    def build_representation(self, h: np.ndarray, instance: RelationInstance) -> np.ndarray:
        """Concatenate the pooled pieces the configured variant asks for.

        The middle piece is the mean of the contextual vectors of original
        tokens strictly between the spans, and the zero vector when the
        spans are adjacent, nested, or overlapping.
        """
        so, sc, oo, oc = instance.marker_positions
        pieces = []
        for segment in self._segments():
            if segment == "cls":
                pieces.append(h[0])
            elif segment == "s_open":
                pieces.append(h[so])
            elif segment == "s_close":
                pieces.append(h[sc])
            elif segment == "o_open":
                pieces.append(h[oo])
            elif segment == "o_close":
                pieces.append(h[oc])
            else:  # mid
                if instance.middle_positions:
                    pieces.append(h[instance.middle_positions].mean(axis=0))
                else:
                    pieces.append(np.zeros(h.shape[1]))
        return np.concatenate(pieces)

    def _head_forward(self, rep: np.ndarray):
        u = rep @ self.head["re.w1"] + self.head["re.b1"]
        z = np.maximum(u, 0.0)
        logits = z @ self.head["re.w2"] + self.head["re.b2"]
        shifted = logits - logits.max()
        exp = np.exp(shifted)
        probs = exp / exp.sum()
        return u, z, probs

    def classify(self, instance: RelationInstance) -> Tuple[str, float]:
        """Argmax relation label and probability for one instance."""
        h = self.encoder.encode(instance.symbols)
        rep = self.build_representation(h, instance)
        _, _, probs = self._head_forward(rep)
        pick = int(probs.argmax())
        return RELATION_LABELS[pick], float(probs[pick])

    def loss_and_grads(self, batch: Sequence[RelationInstance]):
        """Mean cross-entropy over the batch of labeled instances."""
        grads = self.zero_grads()
        if not batch:
            return 0.0, grads
        loss = 0.0
        scale = 1.0 / len(batch)
        for inst in batch:
            h, cache = self.encoder.forward(inst.symbols)
            rep = self.build_representation(h, inst)
            u, z, probs = self._head_forward(rep)
            loss += float(-np.log(probs[inst.label] + 1e-300))
            dlogits = probs.copy()
            dlogits[inst.label] -= 1.0
            dlogits *= scale
            grads["re.w2"] += np.outer(z, dlogits)
            grads["re.b2"] += dlogits
            dz = self.head["re.w2"] @ dlogits
            du = dz * (u > 0.0)
            grads["re.w1"] += np.outer(rep, du)
            grads["re.b1"] += du
            drep = self.head["re.w1"] @ du
            dh = np.zeros_like(h)
            d = self.encoder.dim
            so, sc, oo, oc = inst.marker_positions
            for k, segment in enumerate(self._segments()):
                chunk = drep[k * d:(k + 1) * d]
                if segment == "cls":
                    dh[0] += chunk
                elif segment == "s_open":
                    dh[so] += chunk
                elif segment == "s_close":
                    dh[sc] += chunk
                elif segment == "o_open":
                    dh[oo] += chunk
                elif segment == "o_close":
                    dh[oc] += chunk
                elif inst.middle_positions:
                    share = chunk / len(inst.middle_positions)
                    for pos in inst.middle_positions:
                        dh[pos] += share
            self.encoder.backward(cache, dh, grads)
        return loss * scale, grads


# ---------------------------------------------------------------------------
# corpus wiring


def recoverable_gold_mentions(view: DocView) -> Dict[int, List[Tuple[str, SpanMention]]]:
    """Gold entities as token-span mentions, grouped by sentence index.

    Entities that tokenization cannot recover are absent; the loss report
    is the place that accounts for them.
    """
    aligned = align_document(view)
    by_sent: Dict[int, List[Tuple[str, SpanMention]]] = {}
    for entity in view.doc.entities:
        k, a = aligned[entity.entity_id]
        if k is None or not a.recoverable:
            continue
        mention = SpanMention(
            view.doc.doc_id, view.sentences[k].sent_id, a.token_start, a.token_end,
            entity.etype, entity.char_start, entity.char_end)
        by_sent.setdefault(k, []).append((entity.entity_id, mention))
    return by_sent


def gold_training_instances(model: RelationModel, docs: Sequence[Document],
                            segmenter=None) -> List[RelationInstance]:
    """Instances over recoverable gold entity pairs, labeled from gold.

    Pairs whose gold relation belongs to a non-evaluated group get the null
    label, as do pairs with no gold relation at all. A pair carrying several
    distinct evaluated labels yields one instance per label. Cross-sentence
    gold pairs cannot be represented and are skipped (the loss report
    already counts them).
    """
    instances = []
    for doc in docs:
        view = DocView.build(doc, segmenter)
        label_map: Dict[Tuple[str, str], List[str]] = {}
        for rel in doc.relations:
            if rel.eval_flag:
                label_map.setdefault((rel.arg1, rel.arg2), []).append(rel.cpr_group)
        for k, id_mentions in sorted(recoverable_gold_mentions(view).items()):
            surfaces = [t.surface for t in view.tokens[k]]
            left, right = view.context(k)
            chems = [(eid, m) for eid, m in id_mentions if m.etype == "CHEMICAL"]
            genes = [(eid, m) for eid, m in id_mentions if m.etype == "GENE"]
            chems.sort(key=lambda x: (x[1].token_start, x[1].token_end))
            genes.sort(key=lambda x: (x[1].token_start, x[1].token_end))
            for chem_id, chem in chems:
                for gene_id, gene in genes:
                    groups = sorted(set(label_map.get((chem_id, gene_id), ())))
                    labels = [RELATION_LABELS.index(g) for g in groups] or [NULL_RELATION]
                    for label in labels:
                        instances.append(model.build_instance(
                            doc.doc_id, view.sentences[k].sent_id, surfaces,
                            left, right, chem, gene, label))
    return instances


def prediction_instances(model: RelationModel, view: DocView, sent_idx: int,
                         mentions: Sequence[SpanMention]) -> List[RelationInstance]:
    surfaces = [t.surface for t in view.tokens[sent_idx]]
    left, right = view.context(sent_idx)
    return [model.build_instance(view.doc.doc_id, view.sentences[sent_idx].sent_id,
                                 surfaces, left, right, chem, gene)
            for chem, gene in generate_pairs(mentions)]


def train_re(model: RelationModel, instances: Sequence[RelationInstance],
             epochs: Optional[int] = None, batch_size: Optional[int] = None,
             seed: int = 0, lr: Optional[float] = None) -> List[float]:
    """Adam training over labeled instances; returns per-epoch mean loss."""
    rc = model.config.relation
    epochs = rc.epochs if epochs is None else epochs
    batch_size = rc.batch_size if batch_size is None else batch_size
    labeled = [inst for inst in instances if inst.label is not None]
    if not labeled:
        log.warning("train_re called with no labeled instances; nothing to do")
        return []
    opt = Adam(model.parameters(), lr=rc.lr if lr is None else lr)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(labeled))
        epoch_loss = 0.0
        for step, lo in enumerate(range(0, len(order), batch_size)):
            batch = [labeled[i] for i in order[lo:lo + batch_size]]
            loss, grads = model.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, step, loss)
            epoch_loss += loss * len(batch)
            opt.step(grads)
        curve.append(epoch_loss / len(labeled))
    return curve


@dataclass(frozen=True)
class RelationPrediction:
    doc_id: str
    sent_id: int
    subject: SpanMention
    object: SpanMention
    label: str
    prob: float


def predict_relations(model: RelationModel, view: DocView, sent_idx: int,
                      mentions: Sequence[SpanMention]) -> List[RelationPrediction]:
    """Classify every pair in one sentence, keeping non-null predictions."""
    out = []
    for inst in prediction_instances(model, view, sent_idx, mentions):
        label, prob = model.classify(inst)
        if label != "null":
            out.append(RelationPrediction(inst.doc_id, inst.sent_id,
                                          inst.subject, inst.object, label, prob))
    return out


def predict_e2e(ner_model: NerModel, re_model: RelationModel,
                docs: Sequence[Document], segmenter=None
                ) -> Tuple[List[SpanMention], List[RelationPrediction]]:
    """Full pipeline: predicted entities feed the relation classifier.

    The same character-level pair predicted from two different sentences is
    kept twice here; scoring set semantics deduplicates.
    """
    examples = ner_model.prepare_documents(docs, segmenter, with_labels=False)
    by_doc_sent = {}
    for ex in examples:
        by_doc_sent[(ex.doc_id, ex.sent_id)] = ner_model.predict_mentions(ex)
    all_mentions: List[SpanMention] = []
    all_relations: List[RelationPrediction] = []
    for doc in docs:
        view = DocView.build(doc, segmenter)
        for k, sent in enumerate(view.sentences):
            mentions = by_doc_sent.get((doc.doc_id, sent.sent_id), [])
            all_mentions.extend(mentions)
            all_relations.extend(predict_relations(re_model, view, k, mentions))
    return all_mentions, all_relations
