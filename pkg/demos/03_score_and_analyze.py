"""Strict scoring and the four-way breakdown of relation errors.

A tiny hand-built world: two documents, four gold relations, and a
prediction set seeded with one mistake of each kind. The scorer counts
strict set matches; the analyzer then explains every relation error as
NER-caused, a missed pair (null), a label confusion, or a spurious
prediction, with exact count conservation.
"""

from chemspan import (
    Document,
    GoldEntity,
    GoldRelation,
    analyze,
    gold_entity_set,
    gold_relation_set,
    render_report,
    render_score_report,
    score_ner,
    score_re,
)
from chemspan.analysis import render_category_items


def make_doc(doc_id, sentence_pairs):
    entities, relations, parts = [], [], []
    offset = 0
    for i, (chem, verb, gene, group) in enumerate(sentence_pairs):
        text = f"{chem} {verb} {gene} today."
        entities.append(GoldEntity(f"C{i}", "CHEMICAL", offset, offset + len(chem), chem))
        g0 = offset + len(chem) + len(verb) + 2
        entities.append(GoldEntity(f"G{i}", "GENE", g0, g0 + len(gene), gene))
        relations.append(GoldRelation(group, True, f"C{i}", f"G{i}"))
        parts.append(text)
        offset += len(text) + 1
    text = " ".join(parts)
    return Document(doc_id, text, "", text + " ",
                    entities=tuple(entities), relations=tuple(relations))


def main():
    docs = [
        make_doc("d0", [("Aspirin", "inhibits", "COX2", "CPR:4"),
                        ("Caffeine", "stimulates", "ADORA2A", "CPR:5")]),
        make_doc("d1", [("Morphine", "blocks", "OPRM1", "CPR:6"),
                        ("Nicotine", "upregulates", "CHRNA4", "CPR:3")]),
    ]

    def ekey(surface):
        for d in docs:
            for e in d.entities:
                if e.surface == surface:
                    return (d.doc_id, e.char_start, e.char_end, e.etype)
        raise KeyError(surface)

    def rkey(chem, gene, label):
        c, g = ekey(chem), ekey(gene)
        assert c[0] == g[0]
        return (c[0], c[1], c[2], g[1], g[2], label)

    slipped_caffeine = ekey("Caffeine")[:1] + (ekey("Caffeine")[1] + 1,) + ekey("Caffeine")[2:]
    pred_entities = (gold_entity_set(docs) - {ekey("Caffeine")}) | {slipped_caffeine}
    pred_relations = {
        rkey("Aspirin", "COX2", "CPR:4"),                      # correct
        slipped_caffeine[:1] + slipped_caffeine[1:3]
        + ekey("ADORA2A")[1:3] + ("CPR:5",),                   # NER-caused FP
        rkey("Morphine", "OPRM1", "CPR:5"),                    # label confusion
        rkey("Aspirin", "ADORA2A", "CPR:9"),                   # spurious: pair has no gold
    }                                                          # Nicotine pair: null FN

    print(render_score_report(score_ner(gold_entity_set(docs), pred_entities)))
    print(render_score_report(score_re(gold_relation_set(docs), pred_relations)))

    breakdown = analyze(docs, pred_entities, pred_relations)
    print(render_report(breakdown))
    print("label-confusion examples:")
    print(render_category_items(breakdown, "confusion_fn"))


if __name__ == "__main__":
    main()
