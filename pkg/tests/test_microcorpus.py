"""The shipped synthetic corpus: determinism, structure, learnability shape."""

from pathlib import Path

from chemspan.alignment import DocView, compute_loss_report
from chemspan.corpus import EVAL_GROUPS, save_corpus
from chemspan.microcorpus import build_micro_corpus, load_micro_corpus


def test_builder_is_deterministic():
    assert build_micro_corpus() == build_micro_corpus()


def test_shipped_files_match_the_builder(tmp_path):
    save_corpus(build_micro_corpus(), tmp_path)
    shipped = Path(__file__).resolve().parents[1] / "src" / "chemspan" / "data" / "micro"
    for name in ("abstracts.tsv", "entities.tsv", "relations.tsv"):
        assert (tmp_path / name).read_bytes() == (shipped / name).read_bytes(), name


def test_loading_the_shipped_copy_reproduces_the_builder():
    assert load_micro_corpus() == build_micro_corpus()


def test_corpus_shape():
    docs = build_micro_corpus()
    assert len(docs) == 10
    assert sum(len(DocView.build(doc).sentences) for doc in docs) == 50
    groups = {r.cpr_group for doc in docs for r in doc.relations if r.eval_flag}
    assert groups == set(EVAL_GROUPS)
    assert any(not r.eval_flag for doc in docs for r in doc.relations)


def test_nothing_in_the_corpus_is_tokenization_lost():
    report = compute_loss_report(build_micro_corpus())
    assert report.entities_lost == 0
    assert report.relations_lost == 0
    assert report.entities_total == 84
    assert report.relations_total == 34


def test_nested_entity_spans_are_present():
    nested = 0
    for doc in build_micro_corpus():
        for chem in doc.entities:
            if chem.etype != "CHEMICAL":
                continue
            for gene in doc.entities:
                if gene.etype == "GENE" and \
                        gene.char_start <= chem.char_start and \
                        chem.char_end <= gene.char_end:
                    nested += 1
    assert nested == 2  # one nested chloride per transporter sentence


def test_entity_surfaces_match_document_slices():
    for doc in build_micro_corpus():
        for entity in doc.entities:
            assert doc.text[entity.char_start:entity.char_end] == entity.surface
