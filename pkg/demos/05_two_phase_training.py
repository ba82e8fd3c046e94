"""Both training phases end to end, at a size that finishes in a few minutes.

Phase 1 learns isomorphic vs non-isomorphic. Its mistakes on a fresh set
become the labels of phase 2, which learns to tell easy pairs from hard ones.
Formulas are kept small here so the run is quick; the acceptance tests use
the full-size generator settings.
"""
import logging
import tempfile
from pathlib import Path

from csfi.generator import DatasetSpec, GenParams, generate_samples, phase2_eval_samples
from csfi.model import ModelConfig
from csfi.pipeline import PHASE2, TrainConfig, build_phase2_training_set, evaluate, train
from csfi.tokenizer import vocabulary_from_samples

logging.basicConfig(level=logging.INFO, format="%(message)s")
gen = dict(pool=tuple("abcdefghijklmn"), symbols_range=(10, 14), clauses_range=(5, 7), clause_cardinality=4)

train_set = generate_samples(DatasetSpec(1000, params=GenParams(seed=1, **gen)))
eval_set = generate_samples(DatasetSpec(200, params=GenParams(seed=2, **gen)))
vocab = vocabulary_from_samples(train_set + eval_set)
cfg = ModelConfig(len(vocab), max_len=128, dropout_rate=0.0)
tc = TrainConfig(epochs=8, learning_rate=1e-3)

with tempfile.TemporaryDirectory() as tmp:
    p1 = train(cfg, train_set, eval_set, tc, vocab, out_dir=Path(tmp) / "phase1")
    report = evaluate(p1.best_params, p1.cfg, vocab, eval_set)
    print("\nphase 1 accuracy:", report.row("0.5").accuracy)
    for cat, counts in report.per_category.items():
        print(f"  {cat:10s} right {counts['right']:3d} wrong {counts['wrong']:3d}")

    source = generate_samples(DatasetSpec(1000, params=GenParams(seed=3, **gen)))
    p2_train = build_phase2_training_set(p1.best_params, p1.cfg, vocab, source, seed=0)
    p2_eval = phase2_eval_samples(200, GenParams(seed=4, **gen))
    print(f"\nphase 2 training set: {len(p2_train)} samples, {sum(s.label2 for s in p2_train)} hard")

    p2 = train(cfg, p2_train, p2_eval, tc, vocab, task=PHASE2, out_dir=Path(tmp) / "phase2")
    report = evaluate(p2.best_params, p2.cfg, vocab, p2_eval, task=PHASE2)
    print("\nphase 2, positive class", report.positive_class)
    for row in report.rows:
        print(f"  threshold {row.name:5s} ({row.threshold:.3f}): precision {row.precision:.3f} "
              f"recall {row.recall:.3f} F1 {row.f1:.3f}")
