"""Command-line interface for the extraction pipeline.

Record formats, all tab-separated, one record per line:

  tokenize     doc_id  sent_id  index  surface  start  end
  predict-ner  doc_id  sent_id  token_start  token_end  type  prob
  predict-re   doc_id  subj_start  subj_end  obj_start  obj_end  label  prob
               subj_char_start  subj_char_end  obj_char_start  obj_char_end

Token offsets in entity records are sentence-local; relation records carry
document-level token offsets (there is no sentence column) and mirror the
character offsets so downstream tools never need to re-tokenize. ``score``
and ``analyze`` match on character offsets, converting entity records back
through the gold corpus tokenization.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Set, Tuple

from .alignment import (
    DocView,
    compute_loss_report,
    parse_loss_report,
    render_loss_report,
    render_lost_items,
)
from .analysis import CATEGORY_ITEMS, analyze, render_category_items, render_report
from .checkpoint import (
    CheckpointError,
    load_ner_model,
    load_re_model,
    save_ner_model,
    save_re_model,
)
from .config import load_config
from .corpus import load_corpus, load_corpus_dir
from .errors import ChemspanError
from .ner import NerModel, train_ner
from .relation import (
    RelationModel,
    gold_training_instances,
    predict_relations,
    recoverable_gold_mentions,
    train_re,
)
from .scoring import (
    EntityKey,
    RelationKey,
    gold_entity_set,
    gold_relation_set,
    render_score_report,
    score_ner,
    score_re,
)


def _write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _read_records(path, n_cols: int, what: str) -> List[List[str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != n_cols:
                raise ChemspanError(f"{path}:{line_no}: {what} record needs "
                                    f"{n_cols} fields, got {len(cols)}")
            rows.append(cols)
    return rows


def _views_by_doc(docs) -> Dict[str, DocView]:
    return {doc.doc_id: DocView.build(doc) for doc in docs}


# ---------------------------------------------------------------------------
# record parsing and formatting


def _entity_records(mentions) -> List[str]:
    return [f"{m.doc_id}\t{m.sent_id}\t{m.token_start}\t{m.token_end}\t"
            f"{m.etype}\t{m.prob:.6f}" for m in mentions]


def _relation_records(predictions, views: Dict[str, DocView]) -> List[str]:
    lines = []
    for p in predictions:
        view = views[p.doc_id]
        flat = view.sent_flat_start[p.sent_id]
        lines.append(
            f"{p.doc_id}\t{flat + p.subject.token_start}\t{flat + p.subject.token_end}\t"
            f"{flat + p.object.token_start}\t{flat + p.object.token_end}\t"
            f"{p.label}\t{p.prob:.6f}\t"
            f"{p.subject.char_start}\t{p.subject.char_end}\t"
            f"{p.object.char_start}\t{p.object.char_end}")
    return lines


def _parse_entity_keys(path, views: Dict[str, DocView]) -> Set[EntityKey]:
    """Entity records back to character-offset keys via the gold tokenization."""
    keys = set()
    for doc_id, sent_id, t_start, t_end, etype, _prob in \
            _read_records(path, 6, "entity"):
        if doc_id not in views:
            raise ChemspanError(f"{path}: prediction for unknown document {doc_id!r}")
        view = views[doc_id]
        k = int(sent_id)
        if not 0 <= k < len(view.sentences):
            raise ChemspanError(f"{path}: document {doc_id} has no sentence {sent_id}")
        tokens = view.tokens[k]
        start, end = int(t_start), int(t_end)
        if not 0 <= start <= end < len(tokens):
            raise ChemspanError(f"{path}: token span [{start},{end}] outside "
                                f"sentence {sent_id} of document {doc_id}")
        keys.add((doc_id, tokens[start].char_start, tokens[end].char_end, etype))
    return keys


def _parse_relation_keys(path) -> Set[RelationKey]:
    keys = set()
    for cols in _read_records(path, 11, "relation"):
        doc_id, label = cols[0], cols[5]
        s0, s1, o0, o1 = (int(c) for c in cols[7:11])
        keys.add((doc_id, s0, s1, o0, o1, label))
    return keys


# ---------------------------------------------------------------------------
# subcommands


def cmd_tokenize(args) -> int:
    docs = load_corpus(args.infile)
    lines = []
    for doc in docs:
        view = DocView.build(doc)
        for sent, tokens in zip(view.sentences, view.tokens):
            for t in tokens:
                lines.append(f"{doc.doc_id}\t{sent.sent_id}\t{t.index}\t"
                             f"{t.surface}\t{t.char_start}\t{t.char_end}")
    _write_lines(args.out, lines)
    print(f"wrote {len(lines)} token records to {args.out}")
    return 0


def cmd_align_stats(args) -> int:
    docs = load_corpus_dir(args.corpus)
    report = compute_loss_report(docs)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(render_loss_report(report))
    items_path = args.items or f"{args.report}.items.tsv"
    with open(items_path, "w", encoding="utf-8") as fh:
        fh.write(render_lost_items(report))
    print(render_loss_report(report), end="")
    print(f"lost-item records written to {items_path}")
    return 0


def cmd_train_ner(args) -> int:
    cfg = load_config(args.config)
    docs = load_corpus_dir(args.corpus)
    model = NerModel(cfg, seed=args.seed)
    examples = model.prepare_documents(docs)
    curve = train_ner(model, examples, seed=args.seed)
    save_ner_model(args.out, model)
    if curve:
        print(f"trained {len(curve)} epochs on {len(examples)} sentences; "
              f"loss {curve[0]:.4f} -> {curve[-1]:.4f}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_predict_ner(args) -> int:
    model = load_ner_model(args.ckpt)
    docs = load_corpus_dir(args.corpus)
    mentions = []
    for example in model.prepare_documents(docs, with_labels=False):
        mentions.extend(model.predict_mentions(example))
    _write_lines(args.out, _entity_records(mentions))
    print(f"wrote {len(mentions)} entity records to {args.out}")
    return 0


def cmd_train_re(args) -> int:
    cfg = load_config(args.config)
    docs = load_corpus_dir(args.corpus)
    model = RelationModel(cfg, seed=args.seed)
    instances = gold_training_instances(model, docs)
    curve = train_re(model, instances, seed=args.seed)
    save_re_model(args.out, model)
    if curve:
        print(f"trained {len(curve)} epochs on {len(instances)} pairs; "
              f"loss {curve[0]:.4f} -> {curve[-1]:.4f}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_predict_re(args) -> int:
    model = load_re_model(args.ckpt)
    docs = load_corpus_dir(args.corpus)
    views = _views_by_doc(docs)
    predictions = []
    for doc in docs:
        view = views[doc.doc_id]
        for k, id_mentions in sorted(recoverable_gold_mentions(view).items()):
            mentions = [m for _, m in id_mentions]
            predictions.extend(predict_relations(model, view, k, mentions))
    _write_lines(args.out, _relation_records(predictions, views))
    print(f"wrote {len(predictions)} relation records to {args.out}")
    return 0


def cmd_predict_e2e(args) -> int:
    ner_model = load_ner_model(args.ner_ckpt)
    re_model = load_re_model(args.re_ckpt)
    docs = load_corpus_dir(args.corpus)
    views = _views_by_doc(docs)
    all_mentions = []
    all_relations = []
    for doc in docs:
        view = views[doc.doc_id]
        examples = ner_model.prepare_documents([doc], with_labels=False)
        mentions_by_sent = {ex.sent_id: ner_model.predict_mentions(ex) for ex in examples}
        for k in range(len(view.sentences)):
            mentions = mentions_by_sent.get(view.sentences[k].sent_id, [])
            all_mentions.extend(mentions)
            all_relations.extend(predict_relations(re_model, view, k, mentions))
    _write_lines(args.out_rels, _relation_records(all_relations, views))
    print(f"wrote {len(all_relations)} relation records to {args.out_rels}")
    if args.out_ents:
        _write_lines(args.out_ents, _entity_records(all_mentions))
        print(f"wrote {len(all_mentions)} entity records to {args.out_ents}")
    return 0


def _structural_losses(docs) -> Tuple[Set[EntityKey], Dict[str, int],
                                      Set[RelationKey], Dict[str, int]]:
    report = compute_loss_report(docs)
    by_id = {doc.doc_id: doc for doc in docs}
    entity_keys = set()
    for doc_id, entity_id, _reason in report.lost_entity_ids:
        e = by_id[doc_id].entity_by_id(entity_id)
        entity_keys.add((doc_id, e.char_start, e.char_end, e.etype))
    relation_keys = set()
    for doc_id, arg1, arg2, group, _reason in report.lost_relation_keys:
        chem = by_id[doc_id].entity_by_id(arg1)
        gene = by_id[doc_id].entity_by_id(arg2)
        relation_keys.add((doc_id, chem.char_start, chem.char_end,
                           gene.char_start, gene.char_end, group))
    return (entity_keys, dict(report.entities_lost_by_type),
            relation_keys, dict(report.relations_lost_by_group))


def cmd_score(args) -> int:
    docs = load_corpus_dir(args.gold)
    views = _views_by_doc(docs)
    lost_entities: Set[EntityKey] = set()
    lost_relations: Set[RelationKey] = set()
    entities_lost_by_type: Dict[str, int] = {}
    relations_lost_by_group: Dict[str, int] = {}
    if args.loss_report:
        with open(args.loss_report, encoding="utf-8") as fh:
            stated = parse_loss_report(fh.read())
        lost_entities, entities_lost_by_type, lost_relations, relations_lost_by_group = \
            _structural_losses(docs)
        if (stated.entities_lost != len(lost_entities)
                or stated.relations_lost != len(lost_relations)):
            raise ChemspanError(
                f"{args.loss_report} is stale: it states "
                f"{stated.entities_lost}/{stated.relations_lost} lost "
                f"entities/relations, the corpus has "
                f"{len(lost_entities)}/{len(lost_relations)}")
    if args.task == "ner":
        gold = gold_entity_set(docs) - lost_entities
        predicted = _parse_entity_keys(args.pred, views)
        report = score_ner(gold, predicted, lost_by_type=entities_lost_by_type)
    else:
        gold = gold_relation_set(docs) - lost_relations
        predicted = _parse_relation_keys(args.pred)
        report = score_re(gold, predicted, lost_by_group=relations_lost_by_group)
    print(render_score_report(report), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_record(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"machine-readable report written to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    docs = load_corpus_dir(args.gold)
    views = _views_by_doc(docs)
    pred_entities = _parse_entity_keys(args.pred_ents, views)
    pred_relations = _parse_relation_keys(args.pred_rels)
    breakdown = analyze(docs, pred_entities, pred_relations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_report(breakdown), encoding="utf-8")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(breakdown.to_record(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for category, _attr in CATEGORY_ITEMS:
        (out / f"{category}.tsv").write_text(
            render_category_items(breakdown, category), encoding="utf-8")
    print(render_report(breakdown), end="")
    print(f"report and per-category dumps written to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemspan",
        description="Span-based chemical-protein relation extraction pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="tokenize an abstracts file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("align-stats", help="tokenization loss over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--items", default=None,
                   help="lost-item record file (default: <report>.items.tsv)")
    p.set_defaults(fn=cmd_align_stats)

    p = sub.add_parser("train-ner", help="train the span-based entity model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_ner)

    p = sub.add_parser("predict-ner", help="predict entity mentions")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict_ner)

    p = sub.add_parser("train-re", help="train the relation model on gold pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_re)

    p = sub.add_parser("predict-re", help="classify gold entity pairs")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict_re)

    p = sub.add_parser("predict-e2e", help="predict entities, then relations")
    p.add_argument("--ner-ckpt", required=True)
    p.add_argument("--re-ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-rels", required=True)
    p.add_argument("--out-ents", default=None)
    p.set_defaults(fn=cmd_predict_e2e)

    p = sub.add_parser("score", help="strict micro P/R/F1 against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--task", choices=("ner", "re"), required=True)
    p.add_argument("--loss-report", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("analyze", help="error-analysis report")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred-ents", required=True)
    p.add_argument("--pred-rels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ChemspanError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
