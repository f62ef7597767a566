"""Span-based entity recognition.

Every token span of width 1..max_span_width is a candidate; each candidate
is classified independently as CHEMICAL, GENE, or null from the contextual
embeddings of its boundary tokens plus a learned width embedding. There is
no overlap suppression: nested and overlapping predictions are legitimate
and the relation stage depends on them.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .alignment import DocView, align_document
from .config import PipelineConfig
from .corpus import Document
from .encoder import Adam, TinyEncoder
from .errors import OverLengthError, TrainingDivergedError

log = logging.getLogger(__name__)

NER_LABELS = ("CHEMICAL", "GENE", "null")  # argmax takes the first on ties
NULL_LABEL = 2


@dataclass(frozen=True)
class SpanCandidate:
    sent_id: int
    token_start: int  # sentence-relative, inclusive
    token_end: int    # sentence-relative, inclusive

    @property
    def width(self) -> int:
        return self.token_end - self.token_start + 1


@dataclass(frozen=True)
class SpanMention:
    """A typed span with both token and character coordinates."""

    doc_id: str
    sent_id: int
    token_start: int
    token_end: int
    etype: str
    char_start: int
    char_end: int
    prob: float = 1.0


def span_count(n_tokens: int, max_width: int) -> int:
    """Closed form for the number of candidates: sum over widths of n-w+1."""
    if n_tokens <= 0 or max_width <= 0:
        return 0
    top = min(max_width, n_tokens)
    # widths 1..top contribute n, n-1, ..., n-top+1
    return top * n_tokens - (top * (top - 1)) // 2


def enumerate_spans(n_tokens: int, max_width: int, sent_id: int = 0) -> List[SpanCandidate]:
    """All candidate spans ordered by (start, width)."""
    out = []
    for start in range(n_tokens):
        for end in range(start, min(start + max_width, n_tokens)):
            out.append(SpanCandidate(sent_id, start, end))
    return out


def split_context(left_supply: int, right_supply: int, budget: int) -> Tuple[int, int]:
    """Split a context token budget as evenly as possible across both sides.

    The odd token goes right; budget a side cannot fill spills to the other.
    """
    if budget <= 0:
        return 0, 0
    left_budget = budget // 2
    right_budget = budget - left_budget
    left = min(left_supply, left_budget)
    right = min(right_supply, right_budget)
    spare = budget - left - right
    if spare > 0:
        extra_right = min(spare, right_supply - right)
        right += extra_right
        spare -= extra_right
        left += min(spare, left_supply - left)
    return left, right


@dataclass
class WindowedInput:
    symbols: List[str]
    sent_offset: int  # index of the sentence's first token inside symbols
    n_sent: int


def build_windowed_input(sent_surfaces: Sequence[str], left_context: Sequence[str],
                         right_context: Sequence[str], budget: int, max_len: int,
                         reserved: int = 0) -> WindowedInput:
    """Surround a sentence with up to ``budget`` context tokens.

    ``reserved`` counts extra symbols the caller will add later (markers,
    a sequence-start token) so they are charged against max_len here. When
    sentence plus reserved symbols already exceed max_len this raises:
    context can shrink, the sentence cannot.
    """
    n_sent = len(sent_surfaces)
    room = max_len - n_sent - reserved
    if room < 0:
        raise OverLengthError(
            f"sentence of {n_sent} tokens (+{reserved} reserved) exceeds max_len={max_len}")
    left, right = split_context(len(left_context), len(right_context), min(budget, room))
    taken_left = list(left_context[len(left_context) - left:]) if left else []
    taken_right = list(right_context[:right])
    return WindowedInput(taken_left + list(sent_surfaces) + taken_right, len(taken_left), n_sent)


@dataclass
class NerExample:
    """One sentence prepared for training or prediction."""

    doc_id: str
    sent_id: int
    windowed: WindowedInput
    candidates: List[SpanCandidate]
    labels: Optional[np.ndarray]  # int per candidate, or None at predict time
    token_chars: List[Tuple[int, int]]  # per sentence token, absolute offsets


class NerModel:
    """Span classifier over a trainable encoder."""

    def __init__(self, config: Optional[PipelineConfig] = None, seed: int = 0):
        self.config = config or PipelineConfig()
        self.seed = seed
        ec = self.config.encoder
        nc = self.config.ner
        self.encoder = TinyEncoder(ec.dim, ec.blocks, ec.ffn_dim, ec.buckets,
                                   ec.max_len, seed=seed)
        rng = np.random.default_rng(seed + 101)
        rep_dim = 2 * ec.dim + nc.width_dim
        self.head = {
            "ner.width_emb": rng.normal(0.0, 0.1, (nc.max_span_width, nc.width_dim)),
            "ner.w": rng.normal(0.0, rep_dim ** -0.5, (rep_dim, len(NER_LABELS))),
            "ner.b": np.zeros(len(NER_LABELS)),
        }

    def parameters(self) -> Dict[str, np.ndarray]:
        merged = dict(self.encoder.params)
        merged.update(self.head)
        return merged

    def zero_grads(self) -> Dict[str, np.ndarray]:
        grads = self.encoder.zero_grads()
        grads.update({k: np.zeros_like(v) for k, v in self.head.items()})
        return grads

    # -- data preparation ----------------------------------------------------

    def prepare_documents(self, docs: Sequence[Document], segmenter=None,
                          with_labels: bool = True) -> List[NerExample]:
        """Window and (optionally) label every sentence of the documents.

        Supervision uses recoverable gold entities only; gold spans wider
        than the span limit cannot be represented and are logged.
        """
        nc = self.config.ner
        ec = self.config.encoder
        examples = []
        too_wide = 0
        for doc in docs:
            view = DocView.build(doc, segmenter)
            aligned = align_document(view) if with_labels else {}
            gold_by_sentence: Dict[int, Dict[Tuple[int, int], str]] = {}
            if with_labels:
                for entity in doc.entities:
                    k, a = aligned[entity.entity_id]
                    if k is None or not a.recoverable:
                        continue
                    if a.token_end - a.token_start + 1 > nc.max_span_width:
                        too_wide += 1
                        continue
                    gold_by_sentence.setdefault(k, {})[(a.token_start, a.token_end)] = a.etype
            for k, sent in enumerate(view.sentences):
                surfaces = [t.surface for t in view.tokens[k]]
                if not surfaces:
                    continue
                left, right = view.context(k)
                windowed = build_windowed_input(surfaces, left, right,
                                                nc.context_window, ec.max_len)
                candidates = enumerate_spans(len(surfaces), nc.max_span_width, sent.sent_id)
                labels = None
                if with_labels:
                    labels = np.full(len(candidates), NULL_LABEL, dtype=np.int64)
                    gold = gold_by_sentence.get(k, {})
                    for i, c in enumerate(candidates):
                        etype = gold.get((c.token_start, c.token_end))
                        if etype is not None:
                            labels[i] = NER_LABELS.index(etype)
                examples.append(NerExample(
                    doc.doc_id, sent.sent_id, windowed, candidates, labels,
                    [(t.char_start, t.char_end) for t in view.tokens[k]]))
        if too_wide:
            log.info("NER supervision skipped %d gold entities wider than %d tokens",
                     too_wide, nc.max_span_width)
        return examples

    # -- forward / loss ------------------------------------------------------

    def _span_reps(self, example: NerExample, h: np.ndarray):
        off = example.windowed.sent_offset
        starts = np.fromiter((off + c.token_start for c in example.candidates), dtype=np.int64)
        ends = np.fromiter((off + c.token_end for c in example.candidates), dtype=np.int64)
        widths = np.fromiter((c.width - 1 for c in example.candidates), dtype=np.int64)
        reps = np.concatenate(
            [h[starts], h[ends], self.head["ner.width_emb"][widths]], axis=1)
        return reps, starts, ends, widths

    def _logits(self, reps: np.ndarray) -> np.ndarray:
        return reps @ self.head["ner.w"] + self.head["ner.b"]

    def classify_spans(self, example: NerExample) -> List[Tuple[SpanCandidate, str, float]]:
        """Argmax label and its probability for every candidate span."""
        if not example.candidates:
            return []
        h = self.encoder.encode(example.windowed.symbols)
        reps, *_ = self._span_reps(example, h)
        logits = self._logits(reps)
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        picks = probs.argmax(axis=1)  # first index wins ties: CHEMICAL < GENE < null
        return [(c, NER_LABELS[picks[i]], float(probs[i, picks[i]]))
                for i, c in enumerate(example.candidates)]

    def predict_mentions(self, example: NerExample) -> List[SpanMention]:
        """Non-null candidates as typed mentions with character offsets."""
        mentions = []
        for candidate, label, prob in self.classify_spans(example):
            if label == "null":
                continue
            mentions.append(SpanMention(
                example.doc_id, example.sent_id, candidate.token_start,
                candidate.token_end, label,
                example.token_chars[candidate.token_start][0],
                example.token_chars[candidate.token_end][1],
                prob))
        return mentions

    def loss_and_grads(self, batch: Sequence[NerExample]):
        """Mean cross-entropy over every candidate span in the batch."""
        grads = self.zero_grads()
        total_spans = sum(len(ex.candidates) for ex in batch)
        if total_spans == 0:
            return 0.0, grads
        loss = 0.0
        for ex in batch:
            if not ex.candidates:
                continue
            h, cache = self.encoder.forward(ex.windowed.symbols)
            reps, starts, ends, widths = self._span_reps(ex, h)
            logits = self._logits(reps)
            shifted = logits - logits.max(axis=1, keepdims=True)
            exp = np.exp(shifted)
            probs = exp / exp.sum(axis=1, keepdims=True)
            rows = np.arange(len(ex.candidates))
            loss += float(-np.log(probs[rows, ex.labels] + 1e-300).sum())
            dlogits = probs
            dlogits[rows, ex.labels] -= 1.0
            dlogits /= total_spans
            grads["ner.w"] += reps.T @ dlogits
            grads["ner.b"] += dlogits.sum(axis=0)
            dreps = dlogits @ self.head["ner.w"].T
            d = self.encoder.dim
            dh = np.zeros_like(h)
            np.add.at(dh, starts, dreps[:, :d])
            np.add.at(dh, ends, dreps[:, d:2 * d])
            np.add.at(grads["ner.width_emb"], widths, dreps[:, 2 * d:])
            self.encoder.backward(cache, dh, grads)
        return loss / total_spans, grads


def train_ner(model: NerModel, examples: Sequence[NerExample], epochs: Optional[int] = None,
              batch_size: Optional[int] = None, seed: int = 0,
              lr: Optional[float] = None) -> List[float]:
    """Adam training over prepared sentences; returns per-epoch mean loss.

    Zero epochs is a no-op that leaves the model untouched. Any non-finite
    loss aborts immediately with the epoch and step in the error.
    """
    nc = model.config.ner
    epochs = nc.epochs if epochs is None else epochs
    batch_size = nc.batch_size if batch_size is None else batch_size
    labeled = [ex for ex in examples if ex.labels is not None]
    if not labeled:
        log.warning("train_ner called with no labeled sentences; nothing to do")
        return []
    opt = Adam(model.parameters(), lr=nc.lr if lr is None else lr)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(labeled))
        epoch_loss = 0.0
        spans = 0
        for step, lo in enumerate(range(0, len(order), batch_size)):
            batch = [labeled[i] for i in order[lo:lo + batch_size]]
            loss, grads = model.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, step, loss)
            n_spans = sum(len(ex.candidates) for ex in batch)
            epoch_loss += loss * n_spans
            spans += n_spans
            opt.step(grads)
        curve.append(epoch_loss / max(spans, 1))
    return curve
