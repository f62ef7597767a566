"""Corpus loading, validation, sentence segmentation, and corrections.

The native layout is three tab-separated files (abstracts, entities,
relations) plus two optional ones (pre-computed sentence boundaries and
entity offset corrections). Document text is the title and abstract joined
by a single space; every character offset in the entity file is interpreted
against that joined text and validated with the slice == surface check,
which fails loudly rather than ever shifting an annotation.
"""

import dataclasses
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ContractViolationError, CorpusFormatError, DanglingReferenceError

log = logging.getLogger(__name__)

ENTITY_TYPES = ("CHEMICAL", "GENE")

# the corpus annotates gene mentions with normalizability subtypes; the
# pipeline collapses them to a single GENE class
DEFAULT_TYPE_MAP = {
    "CHEMICAL": "CHEMICAL",
    "GENE": "GENE",
    "GENE-Y": "GENE",
    "GENE-N": "GENE",
}

CPR_GROUPS = tuple(f"CPR:{i}" for i in range(1, 11))
EVAL_GROUPS = ("CPR:3", "CPR:4", "CPR:5", "CPR:6", "CPR:9")
_EVAL_SET = frozenset(EVAL_GROUPS)


@dataclass(frozen=True)
class GoldEntity:
    entity_id: str
    etype: str
    char_start: int
    char_end: int  # exclusive
    surface: str


@dataclass(frozen=True)
class GoldRelation:
    cpr_group: str
    eval_flag: bool
    arg1: str  # chemical entity id
    arg2: str  # gene entity id


@dataclass(frozen=True)
class Sentence:
    sent_id: int
    char_start: int
    char_end: int  # exclusive


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    text: str
    entities: Tuple[GoldEntity, ...] = ()
    relations: Tuple[GoldRelation, ...] = ()
    sentence_boundaries: Optional[Tuple[Tuple[int, int], ...]] = None

    def entity_by_id(self, entity_id: str) -> GoldEntity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise DanglingReferenceError(self.doc_id, entity_id)


@dataclass
class LoadDiagnostics:
    """Per-file parse bookkeeping surfaced by load_corpus."""

    line_counts: Dict[str, int] = field(default_factory=dict)
    duplicate_relations: List[Tuple[str, str, str, str]] = field(default_factory=list)
    multi_label_pairs: List[Tuple[str, str, str, Tuple[str, ...]]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def join_title_abstract(title: str, abstract: str) -> str:
    """Single-space join; all entity offsets are against this text."""
    return title + " " + abstract


def canonical_group(raw: str) -> str:
    m = re.fullmatch(r"CPR[:\- ]?([0-9]+)", raw.strip())
    if not m or not 1 <= int(m.group(1)) <= 10:
        raise ValueError(f"unknown relation group {raw!r}")
    return f"CPR:{int(m.group(1))}"


def is_eval_group(group: str) -> bool:
    return group in _EVAL_SET


_TRUE = {"Y", "y", "true", "True", "TRUE", "1"}
_FALSE = {"N", "n", "false", "False", "FALSE", "0"}


def _parse_flag(raw: str) -> bool:
    raw = raw.strip()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ValueError(f"unparseable flag {raw!r}")


def _read_rows(path) -> Iterable[Tuple[int, List[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            yield line_no, line.split("\t")


def _strip_arg(value: str) -> str:
    for prefix in ("Arg1:", "Arg2:"):
        if value.startswith(prefix):
            return value[len(prefix):]
    return value


def load_corpus_with_diagnostics(
    abstracts_path,
    entities_path=None,
    relations_path=None,
    sentences_path=None,
    type_map: Optional[Dict[str, str]] = None,
) -> Tuple[List[Document], LoadDiagnostics]:
    """Load and validate a corpus; returns documents plus parse diagnostics.

    Entities and relations files are optional so that raw text can be
    tokenized without annotations. Relation rows may have 4, 5, or 6
    columns: (doc, group, arg1, arg2) with the eval flag derived from the
    group, (doc, group, flag, arg1, arg2), or the 6-column export that has
    an extra relation-name column between flag and args. ``Arg1:``/``Arg2:``
    prefixes on the argument ids are tolerated.
    """
    tmap = dict(DEFAULT_TYPE_MAP if type_map is None else type_map)
    diags = LoadDiagnostics()

    texts: Dict[str, Tuple[str, str]] = {}
    order: List[str] = []
    for line_no, cols in _read_rows(abstracts_path):
        if len(cols) != 3:
            raise CorpusFormatError(abstracts_path, line_no, "column count",
                                    f"expected 3 tab-separated fields, got {len(cols)}")
        doc_id, title, abstract = cols
        if not doc_id:
            raise CorpusFormatError(abstracts_path, line_no, "doc_id", "empty")
        if doc_id in texts:
            raise CorpusFormatError(abstracts_path, line_no, "doc_id", f"duplicate {doc_id!r}")
        texts[doc_id] = (title, abstract)
        order.append(doc_id)
    diags.line_counts[str(abstracts_path)] = len(order)

    entities: Dict[str, List[GoldEntity]] = {d: [] for d in order}
    if entities_path is not None:
        n = 0
        for line_no, cols in _read_rows(entities_path):
            if len(cols) != 6:
                raise CorpusFormatError(entities_path, line_no, "column count",
                                        f"expected 6 tab-separated fields, got {len(cols)}")
            doc_id, entity_id, raw_type, raw_start, raw_end, surface = cols
            if doc_id not in texts:
                raise DanglingReferenceError(doc_id, entity_id, "entity for unknown document")
            if raw_type not in tmap:
                raise CorpusFormatError(entities_path, line_no, "type",
                                        f"unknown entity type {raw_type!r}")
            try:
                start, end = int(raw_start), int(raw_end)
            except ValueError:
                raise CorpusFormatError(entities_path, line_no, "offsets",
                                        f"non-integer offsets {raw_start!r}/{raw_end!r}") from None
            text = join_title_abstract(*texts[doc_id])
            if not (0 <= start < end <= len(text)):
                raise CorpusFormatError(entities_path, line_no, "offsets",
                                        f"[{start},{end}) out of bounds for document {doc_id}")
            if text[start:end] != surface:
                raise CorpusFormatError(
                    entities_path, line_no, "surface",
                    f"document {doc_id} slice [{start},{end}) is "
                    f"{text[start:end]!r}, file says {surface!r}")
            if any(e.entity_id == entity_id for e in entities[doc_id]):
                raise CorpusFormatError(entities_path, line_no, "entity_id",
                                        f"duplicate {entity_id!r} in document {doc_id}")
            entities[doc_id].append(GoldEntity(entity_id, tmap[raw_type], start, end, surface))
            n += 1
        diags.line_counts[str(entities_path)] = n

    relations: Dict[str, List[GoldRelation]] = {d: [] for d in order}
    if relations_path is not None:
        n = 0
        seen: Dict[Tuple[str, str, str, str], int] = {}
        for line_no, cols in _read_rows(relations_path):
            if len(cols) == 4:
                doc_id, raw_group, raw_arg1, raw_arg2 = cols
                raw_flag = None
            elif len(cols) == 5:
                doc_id, raw_group, raw_flag, raw_arg1, raw_arg2 = cols
            elif len(cols) == 6:
                doc_id, raw_group, raw_flag, _name, raw_arg1, raw_arg2 = cols
            else:
                raise CorpusFormatError(relations_path, line_no, "column count",
                                        f"expected 4-6 tab-separated fields, got {len(cols)}")
            if doc_id not in texts:
                raise DanglingReferenceError(doc_id, raw_arg1, "relation for unknown document")
            try:
                group = canonical_group(raw_group)
            except ValueError as exc:
                raise CorpusFormatError(relations_path, line_no, "cpr_group", str(exc)) from None
            if raw_flag is None:
                flag = is_eval_group(group)
            else:
                try:
                    flag = _parse_flag(raw_flag)
                except ValueError as exc:
                    raise CorpusFormatError(relations_path, line_no, "eval_flag", str(exc)) from None
            if flag != is_eval_group(group):
                raise CorpusFormatError(
                    relations_path, line_no, "eval_flag",
                    f"{group} must have eval_flag={'Y' if is_eval_group(group) else 'N'}")
            arg1, arg2 = _strip_arg(raw_arg1), _strip_arg(raw_arg2)
            ents = {e.entity_id: e for e in entities[doc_id]}
            for arg, want in ((arg1, "CHEMICAL"), (arg2, "GENE")):
                if arg not in ents:
                    raise DanglingReferenceError(doc_id, arg, "relation argument not in entity file")
                if ents[arg].etype != want:
                    raise CorpusFormatError(
                        relations_path, line_no, "argument type",
                        f"{arg} in document {doc_id} is {ents[arg].etype}, expected {want}")
            key = (doc_id, group, arg1, arg2)
            if key in seen:
                diags.duplicate_relations.append(key)
                diags.warnings.append(
                    f"{relations_path}:{line_no}: duplicate relation {key} "
                    f"(first seen on line {seen[key]}), dropped")
                log.warning(diags.warnings[-1])
                continue
            seen[key] = line_no
            relations[doc_id].append(GoldRelation(group, flag, arg1, arg2))
            n += 1
        diags.line_counts[str(relations_path)] = n

        pair_labels: Dict[Tuple[str, str, str], List[str]] = {}
        for doc_id, rels in relations.items():
            for r in rels:
                if r.eval_flag:
                    pair_labels.setdefault((doc_id, r.arg1, r.arg2), []).append(r.cpr_group)
        for (doc_id, a1, a2), groups in sorted(pair_labels.items()):
            if len(groups) > 1:
                diags.multi_label_pairs.append((doc_id, a1, a2, tuple(sorted(groups))))

    boundaries: Dict[str, List[Tuple[int, int]]] = {}
    if sentences_path is not None:
        n = 0
        for line_no, cols in _read_rows(sentences_path):
            if len(cols) != 3:
                raise CorpusFormatError(sentences_path, line_no, "column count",
                                        f"expected 3 tab-separated fields, got {len(cols)}")
            doc_id, raw_start, raw_end = cols
            if doc_id not in texts:
                raise DanglingReferenceError(doc_id, f"[{raw_start},{raw_end})",
                                             "sentence for unknown document")
            try:
                start, end = int(raw_start), int(raw_end)
            except ValueError:
                raise CorpusFormatError(sentences_path, line_no, "offsets",
                                        f"non-integer offsets {raw_start!r}/{raw_end!r}") from None
            boundaries.setdefault(doc_id, []).append((start, end))
            n += 1
        diags.line_counts[str(sentences_path)] = n

    docs = []
    for doc_id in order:
        title, abstract = texts[doc_id]
        docs.append(Document(
            doc_id=doc_id,
            title=title,
            abstract=abstract,
            text=join_title_abstract(title, abstract),
            entities=tuple(entities[doc_id]),
            relations=tuple(relations[doc_id]),
            sentence_boundaries=tuple(boundaries[doc_id]) if doc_id in boundaries else None,
        ))
    return docs, diags


def load_corpus(abstracts_path, entities_path=None, relations_path=None,
                sentences_path=None, type_map=None) -> List[Document]:
    docs, _ = load_corpus_with_diagnostics(
        abstracts_path, entities_path, relations_path, sentences_path, type_map)
    return docs


def load_corpus_dir(corpus_dir, type_map=None) -> List[Document]:
    """Load abstracts/entities/relations(.tsv) and optional sentences.tsv."""
    d = Path(corpus_dir)
    abstracts = d / "abstracts.tsv"
    if not abstracts.exists():
        raise FileNotFoundError(f"{abstracts} not found")
    entities = d / "entities.tsv"
    relations = d / "relations.tsv"
    sentences = d / "sentences.tsv"
    docs = load_corpus(
        abstracts,
        entities if entities.exists() else None,
        relations if relations.exists() else None,
        sentences if sentences.exists() else None,
        type_map,
    )
    corrections = d / "corrections.tsv"
    if corrections.exists():
        fixes = load_corrections(corrections)
        docs = [apply_corrections(doc, fixes.get(doc.doc_id, [])) for doc in docs]
    return docs


def save_corpus(docs: Sequence[Document], corpus_dir) -> None:
    """Write the corpus back out in the native three-file layout."""
    d = Path(corpus_dir)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "abstracts.tsv", "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(f"{doc.doc_id}\t{doc.title}\t{doc.abstract}\n")
    with open(d / "entities.tsv", "w", encoding="utf-8") as fh:
        for doc in docs:
            for e in doc.entities:
                fh.write(f"{doc.doc_id}\t{e.entity_id}\t{e.etype}\t"
                         f"{e.char_start}\t{e.char_end}\t{e.surface}\n")
    with open(d / "relations.tsv", "w", encoding="utf-8") as fh:
        for doc in docs:
            for r in doc.relations:
                flag = "Y" if r.eval_flag else "N"
                fh.write(f"{doc.doc_id}\t{r.cpr_group}\t{flag}\t{r.arg1}\t{r.arg2}\n")
    if any(doc.sentence_boundaries is not None for doc in docs):
        with open(d / "sentences.tsv", "w", encoding="utf-8") as fh:
            for doc in docs:
                for s, e in doc.sentence_boundaries or ():
                    fh.write(f"{doc.doc_id}\t{s}\t{e}\n")


# ---------------------------------------------------------------------------
# sentence segmentation

# a sentence ends at . ! or ? when followed by whitespace and an
# uppercase letter or digit; abbreviations are not special-cased
_BOUNDARY = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")

SegmenterFn = Callable[[str], Sequence[Tuple[int, int]]]


def default_segmenter(text: str) -> List[Tuple[int, int]]:
    cuts = [m.end() for m in _BOUNDARY.finditer(text)]
    spans = []
    prev = 0
    for cut in cuts + [len(text)]:
        piece = text[prev:cut]
        lead = len(piece) - len(piece.lstrip())
        trail = len(piece) - len(piece.rstrip())
        if piece.strip():
            spans.append((prev + lead, cut - trail))
        prev = cut
    return spans


def validate_sentences(text: str, intervals: Sequence[Tuple[int, int]]) -> None:
    """Raise ContractViolationError unless the intervals are a valid cover."""
    prev_end = 0
    for start, end in intervals:
        if not (0 <= start < end <= len(text)):
            raise ContractViolationError(
                f"sentence [{start},{end}) out of bounds for text of length {len(text)}")
        if start < prev_end:
            raise ContractViolationError(
                f"sentence [{start},{end}) overlaps or precedes previous end {prev_end}")
        prev_end = end
    covered = [False] * len(text)
    for start, end in intervals:
        for i in range(start, end):
            covered[i] = True
    for i, ch in enumerate(text):
        if not ch.isspace() and not covered[i]:
            raise ContractViolationError(
                f"non-whitespace character at offset {i} ({ch!r}) not covered by any sentence")


def segment(doc: Document, segmenter: Optional[SegmenterFn] = None) -> List[Sentence]:
    """Split a document into sentences, validating whichever source is used.

    Pre-computed boundaries on the document win; otherwise the supplied
    segmenter (or the built-in rule) runs. Either way the result must be
    ordered, non-overlapping, in bounds, and cover all non-whitespace text.
    """
    if not doc.text:
        raise ValueError(f"document {doc.doc_id} has empty text")
    if doc.sentence_boundaries is not None:
        intervals = list(doc.sentence_boundaries)
    else:
        intervals = list((segmenter or default_segmenter)(doc.text))
    validate_sentences(doc.text, intervals)
    return [Sentence(i, s, e) for i, (s, e) in enumerate(intervals)]


# ---------------------------------------------------------------------------
# offset corrections

def load_corrections(path) -> Dict[str, List[Tuple[str, int, int]]]:
    """Read correction rows: doc_id, entity_id, new_start, new_end."""
    fixes: Dict[str, List[Tuple[str, int, int]]] = {}
    for line_no, cols in _read_rows(path):
        if len(cols) != 4:
            raise CorpusFormatError(path, line_no, "column count",
                                    f"expected 4 tab-separated fields, got {len(cols)}")
        doc_id, entity_id, raw_start, raw_end = cols
        try:
            start, end = int(raw_start), int(raw_end)
        except ValueError:
            raise CorpusFormatError(path, line_no, "offsets",
                                    f"non-integer offsets {raw_start!r}/{raw_end!r}") from None
        fixes.setdefault(doc_id, []).append((entity_id, start, end))
    return fixes


def apply_corrections(doc: Document, corrections: Sequence[Tuple[str, int, int]]) -> Document:
    """Return a new document with entity offsets replaced and surfaces re-read.

    The input document is left untouched. Unknown entity ids and
    out-of-bounds intervals raise.
    """
    if not corrections:
        return doc
    by_id = {e.entity_id: e for e in doc.entities}
    for entity_id, start, end in corrections:
        if entity_id not in by_id:
            raise DanglingReferenceError(doc.doc_id, entity_id, "correction target")
        if not (0 <= start < end <= len(doc.text)):
            raise ValueError(
                f"correction for {doc.doc_id}/{entity_id}: [{start},{end}) "
                f"out of bounds for text of length {len(doc.text)}")
        old = by_id[entity_id]
        by_id[entity_id] = dataclasses.replace(
            old, char_start=start, char_end=end, surface=doc.text[start:end])
    new_entities = tuple(by_id[e.entity_id] for e in doc.entities)
    return dataclasses.replace(doc, entities=new_entities)
