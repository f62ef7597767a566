"""Train both models on the shipped micro corpus and score end to end.

One seed of the full recipe: span NER over every candidate span, then the
relation classifier over typed-marker pairs, then strict set-based scoring
of the pipeline (predicted entities feeding relation prediction). Takes a
few seconds on one CPU core.
"""

import tempfile
from pathlib import Path

from chemspan import (
    NerModel,
    PipelineConfig,
    RelationModel,
    gold_entity_set,
    gold_relation_set,
    gold_training_instances,
    load_micro_corpus,
    load_ner_model,
    predict_e2e,
    predicted_entity_set,
    predicted_relation_set,
    render_score_report,
    save_ner_model,
    save_re_model,
    score_ner,
    score_re,
    train_ner,
    train_re,
)


def main():
    docs = load_micro_corpus()
    config = PipelineConfig()
    print(f"{len(docs)} documents, {sum(len(d.entities) for d in docs)} gold entities, "
          f"{sum(1 for d in docs for r in d.relations if r.eval_flag)} evaluated relations")

    ner = NerModel(config, seed=0)
    examples = ner.prepare_documents(docs)
    curve = train_ner(ner, examples, seed=0)
    print(f"\nNER: {len(examples)} sentences, {config.ner.epochs} epochs, "
          f"loss {curve[0]:.4f} -> {curve[-1]:.4f}")
    mentions = [m for ex in examples for m in ner.predict_mentions(ex)]
    print(render_score_report(score_ner(gold_entity_set(docs),
                                        predicted_entity_set(mentions))))

    re_model = RelationModel(config, seed=0)
    instances = gold_training_instances(re_model, docs)
    curve = train_re(re_model, instances, seed=0)
    print(f"RE: {len(instances)} gold-pair instances, {config.relation.epochs} epochs, "
          f"loss {curve[0]:.4f} -> {curve[-1]:.4f}")

    _, relations = predict_e2e(ner, re_model, docs)
    print(render_score_report(score_re(gold_relation_set(docs),
                                       predicted_relation_set(relations))))

    with tempfile.TemporaryDirectory() as tmp:
        ner_path = Path(tmp) / "ner.ckpt"
        save_ner_model(ner_path, ner)
        save_re_model(Path(tmp) / "re.ckpt", re_model)
        reloaded = load_ner_model(ner_path)
        same = all((reloaded.parameters()[k] == v).all()
                   for k, v in ner.parameters().items())
        print(f"checkpoint round trip: {ner_path.stat().st_size} bytes, "
              f"parameters identical: {same}")


if __name__ == "__main__":
    main()
