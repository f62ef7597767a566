"""End-to-end command-line tests over small temporary corpora."""

import json

import numpy as np
import pytest

from chemspan.checkpoint import (
    CheckpointError,
    load_ner_model,
    load_re_model,
    save_ner_model,
    save_re_model,
)
from chemspan.cli import main
from chemspan.config import EncoderConfig, NerConfig, PipelineConfig, RelationConfig
from chemspan.corpus import Document, GoldEntity, GoldRelation, save_corpus
from chemspan.microcorpus import build_micro_corpus
from chemspan.ner import NerModel
from chemspan.relation import RelationModel


def small_config_dict():
    return {
        "encoder": {"dim": 16, "blocks": 1, "ffn_dim": 32, "buckets": 256, "max_len": 128},
        "ner": {"epochs": 8, "context_window": 40},
        "relation": {"epochs": 12, "context_window": 20, "head_hidden": 16, "lr": 0.01},
    }


@pytest.fixture
def micro_dir(tmp_path):
    path = tmp_path / "corpus"
    save_corpus(build_micro_corpus()[:3], path)
    return path


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_config_dict()), encoding="utf-8")
    return path


def lossy_corpus(tmp_path):
    """One clean document plus one with a mid-token (unrecoverable) entity."""
    clean_text = "Aspirin inhibits COX2 strongly."
    clean = Document(
        "dclean", clean_text, "", clean_text + " ",
        entities=(GoldEntity("T1", "CHEMICAL", 0, 7, "Aspirin"),
                  GoldEntity("T2", "GENE", 17, 21, "COX2")),
        relations=(GoldRelation("CPR:4", True, "T1", "T2"),))
    lossy_text = "Cells were differentiated with retinoic acid and TPA."
    lossy = Document(
        "dlost", lossy_text, "", lossy_text + " ",
        entities=(GoldEntity("T1", "CHEMICAL", 33, 44, "tinoic acid"),
                  GoldEntity("T2", "GENE", 49, 52, "TPA")),
        relations=(GoldRelation("CPR:4", True, "T1", "T2"),))
    path = tmp_path / "lossy"
    save_corpus([clean, lossy], path)
    return path


def test_tokenize_emits_offset_exact_records(tmp_path):
    infile = tmp_path / "abstracts.tsv"
    infile.write_text("d1\tKITD816V mutation.\tIt alters Cl- flux.\n", encoding="utf-8")
    out = tmp_path / "tokens.tsv"
    assert main(["tokenize", "--in", str(infile), "--out", str(out)]) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()]
    assert all(len(r) == 6 for r in rows)
    assert rows[0] == ["d1", "0", "0", "KITD", "0", "4"]
    assert rows[1] == ["d1", "0", "1", "816", "4", "7"]
    # second sentence restarts token indexing but keeps absolute offsets
    second = [r for r in rows if r[1] == "1"]
    assert second[0][2] == "0"
    assert int(second[0][4]) == 19


def test_align_stats_writes_report_and_items(tmp_path, capsys):
    corpus = lossy_corpus(tmp_path)
    report = tmp_path / "loss.txt"
    assert main(["align-stats", "--corpus", str(corpus), "--report", str(report)]) == 0
    text = report.read_text()
    assert "entities_lost\t1" in text
    assert "relations_lost\t1" in text
    items = (tmp_path / "loss.txt.items.tsv").read_text()
    assert "entity\tdlost\tT1\tunalignable" in items
    assert "relation\tdlost\tT1\tT2\tCPR:4\tlost-argument" in items
    assert "entities_lost\t1" in capsys.readouterr().out


def test_full_pipeline_through_the_cli(tmp_path, micro_dir, config_path):
    ner_ckpt = tmp_path / "ner.ckpt"
    re_ckpt = tmp_path / "re.ckpt"
    assert main(["train-ner", "--corpus", str(micro_dir), "--config", str(config_path),
                 "--seed", "1", "--out", str(ner_ckpt)]) == 0
    assert main(["train-re", "--corpus", str(micro_dir), "--config", str(config_path),
                 "--seed", "1", "--out", str(re_ckpt)]) == 0

    ents = tmp_path / "ents.tsv"
    assert main(["predict-ner", "--ckpt", str(ner_ckpt), "--corpus", str(micro_dir),
                 "--out", str(ents)]) == 0
    for line in ents.read_text().splitlines():
        cols = line.split("\t")
        assert len(cols) == 6
        float(cols[5])

    rels = tmp_path / "rels.tsv"
    assert main(["predict-re", "--ckpt", str(re_ckpt), "--corpus", str(micro_dir),
                 "--out", str(rels)]) == 0
    for line in rels.read_text().splitlines():
        cols = line.split("\t")
        assert len(cols) == 11
        assert cols[5].startswith("CPR:")

    e2e_rels = tmp_path / "e2e_rels.tsv"
    e2e_ents = tmp_path / "e2e_ents.tsv"
    assert main(["predict-e2e", "--ner-ckpt", str(ner_ckpt), "--re-ckpt", str(re_ckpt),
                 "--corpus", str(micro_dir), "--out-rels", str(e2e_rels),
                 "--out-ents", str(e2e_ents)]) == 0
    assert e2e_rels.exists() and e2e_ents.exists()

    score_json = tmp_path / "score.json"
    assert main(["score", "--gold", str(micro_dir), "--pred", str(e2e_ents),
                 "--task", "ner", "--out", str(score_json)]) == 0
    record = json.loads(score_json.read_text())
    assert record["task"] == "NER"
    assert record["tp"] + record["fn"] == 24  # gold entities in the 3 docs

    assert main(["score", "--gold", str(micro_dir), "--pred", str(e2e_rels),
                 "--task", "re"]) == 0

    out_dir = tmp_path / "analysis"
    assert main(["analyze", "--gold", str(micro_dir), "--pred-ents", str(e2e_ents),
                 "--pred-rels", str(e2e_rels), "--out", str(out_dir)]) == 0
    assert (out_dir / "report.txt").exists()
    breakdown = json.loads((out_dir / "report.json").read_text())
    assert breakdown["fn_total"] + breakdown["fp_total"] == breakdown["re_errors_total"]
    for name in ("ner_caused_fn", "ner_caused_fp", "null_fn",
                 "confusion_fn", "confusion_fp", "spurious_fp"):
        assert (out_dir / f"{name}.tsv").exists()


def test_score_with_loss_report_matches_plain_scoring(tmp_path, capsys):
    corpus = lossy_corpus(tmp_path)
    report_path = tmp_path / "loss.txt"
    assert main(["align-stats", "--corpus", str(corpus),
                 "--report", str(report_path)]) == 0
    capsys.readouterr()

    # hand-written predictions: the clean document's two entities
    pred = tmp_path / "pred_ents.tsv"
    pred.write_text("dclean\t0\t0\t0\tCHEMICAL\t0.990000\n"
                    "dclean\t0\t2\t3\tGENE\t0.980000\n", encoding="utf-8")
    plain_json = tmp_path / "plain.json"
    loss_json = tmp_path / "with_loss.json"
    assert main(["score", "--gold", str(corpus), "--pred", str(pred),
                 "--task", "ner", "--out", str(plain_json)]) == 0
    assert main(["score", "--gold", str(corpus), "--pred", str(pred), "--task", "ner",
                 "--loss-report", str(report_path), "--out", str(loss_json)]) == 0
    plain = json.loads(plain_json.read_text())
    with_loss = json.loads(loss_json.read_text())
    for field in ("tp", "fp", "fn", "precision", "recall", "f1"):
        assert plain[field] == with_loss[field], field
    assert plain["lost"] == 0 and with_loss["lost"] == 1

    # relation task: predict only the clean document's relation
    pred_rels = tmp_path / "pred_rels.tsv"
    pred_rels.write_text("dclean\t0\t0\t2\t3\tCPR:4\t0.900000\t0\t7\t17\t21\n",
                         encoding="utf-8")
    assert main(["score", "--gold", str(corpus), "--pred", str(pred_rels), "--task", "re",
                 "--loss-report", str(report_path)]) == 0
    out = capsys.readouterr().out
    assert "counts\ttp=1 fp=0 fn=1 lost=1" in out


def test_stale_loss_report_is_refused(tmp_path, capsys):
    corpus = lossy_corpus(tmp_path)
    stale = tmp_path / "stale.txt"
    stale.write_text("entities_total\t4\nentities_lost\t3\n"
                     "relations_total\t2\nrelations_lost\t0\n", encoding="utf-8")
    pred = tmp_path / "pred.tsv"
    pred.write_text("", encoding="utf-8")
    rc = main(["score", "--gold", str(corpus), "--pred", str(pred),
               "--task", "ner", "--loss-report", str(stale)])
    assert rc == 2
    assert "stale" in capsys.readouterr().err


def test_checkpoint_kind_mismatch_is_an_error(tmp_path, micro_dir, capsys):
    cfg = PipelineConfig(
        encoder=EncoderConfig(dim=8, blocks=1, ffn_dim=16, buckets=64, max_len=64),
        ner=NerConfig(context_window=10),
        relation=RelationConfig(context_window=10, head_hidden=8))
    re_ckpt = tmp_path / "re.ckpt"
    save_re_model(re_ckpt, RelationModel(cfg, seed=0))
    rc = main(["predict-ner", "--ckpt", str(re_ckpt), "--corpus", str(micro_dir),
               "--out", str(tmp_path / "x.tsv")])
    assert rc == 2
    assert "expected 'ner'" in capsys.readouterr().err


def test_missing_gold_directory_is_reported_not_raised(tmp_path, capsys):
    rc = main(["score", "--gold", str(tmp_path / "nowhere"),
               "--pred", str(tmp_path / "nofile"), "--task", "ner"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# model persistence wrappers


def tiny_cfg():
    return PipelineConfig(
        encoder=EncoderConfig(dim=8, blocks=1, ffn_dim=16, buckets=64, max_len=64),
        ner=NerConfig(context_window=10, max_span_width=4, width_dim=5),
        relation=RelationConfig(context_window=10, head_hidden=8))


def test_ner_model_round_trips_through_a_checkpoint(tmp_path):
    model = NerModel(tiny_cfg(), seed=7)
    path = tmp_path / "m.ckpt"
    save_ner_model(path, model)
    loaded = load_ner_model(path)
    assert loaded.seed == 7
    assert loaded.config.to_dict() == model.config.to_dict()
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], value)


def test_re_model_round_trips_through_a_checkpoint(tmp_path):
    model = RelationModel(tiny_cfg(), seed=3)
    path = tmp_path / "m.ckpt"
    save_re_model(path, model)
    loaded = load_re_model(path)
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], value)


def test_loading_the_wrong_kind_raises(tmp_path):
    path = tmp_path / "m.ckpt"
    save_ner_model(path, NerModel(tiny_cfg(), seed=0))
    with pytest.raises(CheckpointError):
        load_re_model(path)
