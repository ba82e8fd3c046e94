"""Two-phase training: isomorphism classifier, then hardness classifier.

Phase 1 learns isomorphic (label 1) vs non-isomorphic pairs. Its mistakes on
a fresh dataset become hardness labels (correct -> 0 easy, wrong -> 1 hard),
which train an identical phase-2 model. Phase-2 thresholds act on the
probability of *easy*.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnf import PairSample
from .dataset import write_jsonl
from .metrics import (
    EpochRecord,
    MetricsReport,
    export_curves,
    per_category_table,
    threshold_report,
    threshold_sweep,
)
from .model import (
    ModelConfig,
    init_parameters,
    load_checkpoint,
    loss_and_gradients,
    pair_forward,
    predict_probabilities,
    save_checkpoint,
)
from .optim import Adam
from .tokenizer import Vocabulary, encode_samples

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Task:
    name: str
    target: str          # sample attribute holding the class index
    positive_index: int  # class whose probability the thresholds act on
    positive_name: str


PHASE1 = Task("phase1", "label", 1, "isomorphic")
PHASE2 = Task("phase2", "label2", 0, "easy")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = 1.0
    warmup_steps: int = 0
    eval_every: int | None = None
    seed: int = 0
    head_mode: str = "concat"
    thresholds: tuple[str, ...] = ("0.5", "0.66", "best")

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("decay rates must lie in (0, 1)")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be positive")


@dataclass
class TrainResult:
    params: dict
    best_params: dict
    cfg: ModelConfig
    records: list[EpochRecord]
    best_index: int


def targets(samples: Sequence[PairSample], task: Task) -> np.ndarray:
    y = [getattr(s, task.target) for s in samples]
    if any(v is None for v in y):
        raise ValueError(f"dataset lacks the {task.target!r} field needed by {task.name}")
    return np.asarray(y, dtype=np.int64)


def _lengths(ab: np.ndarray, pad_id: int) -> np.ndarray:
    return (ab != pad_id).sum(1)


def epoch_batches(lengths: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled batches of similar length.

    Samples are permuted, cut into pools of eight batches, sorted by length
    inside each pool, then batched; the batch order is shuffled again.
    """
    perm = rng.permutation(len(lengths))
    pool = batch_size * 8
    batches = []
    for start in range(0, len(perm), pool):
        chunk = perm[start : start + pool]
        chunk = chunk[np.argsort(lengths[chunk], kind="stable")]
        batches.extend(chunk[i : i + batch_size] for i in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def predict(params: dict, cfg: ModelConfig, ab: np.ndarray, ba: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Class probabilities ``(n, num_classes)``; batches grouped by length."""
    order = np.argsort(_lengths(ab, cfg.pad_id), kind="stable")
    probs = np.empty((len(ab), cfg.num_classes))
    for i in range(0, len(order), batch_size):
        idx = order[i : i + batch_size]
        probs[idx] = predict_probabilities(pair_forward(ab[idx], ba[idx], params, cfg))
    return probs


def _mean_nll(probs: np.ndarray, y: np.ndarray) -> float:
    p = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def _record(epoch, step, train_loss, probs, y, task, thresholds, t0) -> EpochRecord:
    report = threshold_report(probs[:, task.positive_index], y == task.positive_index, thresholds)
    acc = float(np.mean(probs.argmax(1) == y))
    best = next((r.threshold for r in report.rows if r.name == "best"), float("nan"))
    return EpochRecord(
        epoch=epoch,
        step=step,
        train_loss=train_loss,
        eval_loss=_mean_nll(probs, y),
        eval_accuracy=acc,
        eval_f1={r.name: r.f1 for r in report.rows},
        best_threshold=best,
        wall_time=time.perf_counter() - t0,
    )


def train(
    cfg: ModelConfig,
    train_set: Sequence[PairSample],
    eval_set: Sequence[PairSample],
    tc: TrainConfig,
    vocab: Vocabulary,
    task: Task = PHASE1,
    out_dir: str | Path | None = None,
    params: dict | None = None,
) -> TrainResult:
    """Train with Adam; evaluate every epoch (or every ``tc.eval_every`` steps).

    The checkpoint with the best eval accuracy (earliest on ties) is retained
    alongside the final one. With ``out_dir`` set, writes ``best.ckpt``,
    ``final.ckpt``, ``vocab.json``, ``curves.csv`` and ``timing.csv``.
    """
    cfg = replace(cfg, head_mode=tc.head_mode, pad_id=vocab.pad_id)
    if params is None:
        params = init_parameters(cfg)
    ab, ba = encode_samples(train_set, vocab, cfg.max_len)
    y = targets(train_set, task)
    eab, eba = encode_samples(eval_set, vocab, cfg.max_len)
    ey = targets(eval_set, task)
    ids = [s.id for s in train_set]
    lengths = _lengths(ab, cfg.pad_id)

    opt = Adam(params, tc.learning_rate, tc.beta1, tc.beta2, tc.eps, tc.weight_decay, tc.clip_norm)
    records: list[EpochRecord] = []
    best_params, best_index, best_acc = None, -1, -1.0
    step = 0
    t0 = time.perf_counter()

    def evaluate_now(epoch, train_loss):
        nonlocal best_params, best_index, best_acc
        probs = predict(params, cfg, eab, eba)
        rec = _record(epoch, step, train_loss, probs, ey, task, tc.thresholds, t0)
        records.append(rec)
        if rec.eval_accuracy > best_acc:
            best_acc, best_index = rec.eval_accuracy, len(records) - 1
            best_params = {k: v.copy() for k, v in params.items()}
        log.info("%s epoch %d step %d: train %.4f eval %.4f acc %.4f f1 %s",
                 task.name, epoch, step, train_loss, rec.eval_loss, rec.eval_accuracy,
                 {k: round(v, 4) for k, v in rec.eval_f1.items()})

    for epoch in range(1, tc.epochs + 1):
        rng = np.random.default_rng([tc.seed, epoch])
        total, count = 0.0, 0
        for batch in epoch_batches(lengths, tc.batch_size, rng):
            loss, grads = loss_and_gradients(
                ab[batch], ba[batch], y[batch], params, cfg, rng=rng, sample_ids=[ids[i] for i in batch]
            )
            lr = tc.learning_rate
            if tc.warmup_steps:
                lr *= min(1.0, (step + 1) / tc.warmup_steps)
            opt.step(params, grads, lr)
            step += 1
            total += loss * len(batch)
            count += len(batch)
            if tc.eval_every and step % tc.eval_every == 0:
                evaluate_now(epoch, total / count)
        if not tc.eval_every:
            evaluate_now(epoch, total / count)

    result = TrainResult(params, best_params, cfg, records, best_index)
    if out_dir is not None:
        save_run(result, vocab, out_dir, task)
    return result


def save_run(result: TrainResult, vocab: Vocabulary, out_dir: str | Path, task: Task) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"task": task.name, "best_epoch": result.records[result.best_index].epoch}
    save_checkpoint(result.best_params, result.cfg, out / "best.ckpt", extra=meta)
    save_checkpoint(result.params, result.cfg, out / "final.ckpt", extra=meta)
    vocab.save(out / "vocab.json")
    export_curves(result.records, out / "curves.csv", include_timing=False)
    with open(out / "timing.csv", "w") as fh:
        fh.write("epoch,step,wall_time\n")
        for r in result.records:
            fh.write(f"{r.epoch},{r.step},{r.wall_time!r}\n")
    (out / "records.json").write_text(json.dumps([asdict(r) for r in result.records], indent=1) + "\n")


def load_records(path: str | Path) -> list[EpochRecord]:
    return [EpochRecord(**r) for r in json.loads(Path(path).read_text())]


def load_model(ckpt: str | Path, vocab_path: str | Path | None = None):
    """``(params, cfg, vocab)`` from a checkpoint and its ``vocab.json`` sidecar."""
    params, cfg, _ = load_checkpoint(ckpt)
    vocab = Vocabulary.load(vocab_path or Path(ckpt).with_name("vocab.json"))
    if len(vocab) != cfg.vocab_size:
        raise ValueError(f"vocabulary has {len(vocab)} tokens, checkpoint expects {cfg.vocab_size}")
    return params, cfg, vocab


def predict_samples(params, cfg, vocab, samples: Sequence[PairSample]) -> np.ndarray:
    ab, ba = encode_samples(samples, vocab, cfg.max_len)
    return predict(params, cfg, ab, ba)


def evaluate(
    params: dict,
    cfg: ModelConfig,
    vocab: Vocabulary,
    samples: Sequence[PairSample],
    task: Task = PHASE1,
    thresholds=("0.5", "0.66", "best"),
    probs: np.ndarray | None = None,
) -> MetricsReport:
    """Per-threshold metrics plus the per-category right/wrong table (at 0.5)."""
    if not samples:
        raise ValueError("cannot evaluate an empty dataset")
    if probs is None:
        probs = predict_samples(params, cfg, vocab, samples)
    y = targets(samples, task)
    p_pos = probs[:, task.positive_index]
    report = threshold_report(p_pos, y == task.positive_index, thresholds,
                              positive_class=task.positive_name, loss=_mean_nll(probs, y))
    correct = (p_pos >= 0.5) == (y == task.positive_index)
    report.per_category = per_category_table([s.category for s in samples], correct)
    return report


def relabel_by_errors(
    samples: Sequence[PairSample], predicted_iso: Sequence[bool], seed: int
) -> list[PairSample]:
    """Balanced hardness dataset from phase-1 predictions.

    Correctly classified samples become easy (0), misclassified ones hard (1);
    the larger group is subsampled to the size of the smaller, then all are
    shuffled.
    """
    predicted_iso = np.asarray(predicted_iso, dtype=bool)
    if len(predicted_iso) != len(samples):
        raise ValueError("one prediction per sample required")
    truth = np.array([s.label == 1 for s in samples], dtype=bool)
    correct = predicted_iso == truth
    right, wrong = np.flatnonzero(correct), np.flatnonzero(~correct)
    if right.size == 0 or wrong.size == 0:
        raise ValueError(
            f"degenerate phase-1 model: {right.size} right, {wrong.size} wrong; cannot balance"
        )
    rng = np.random.default_rng(seed)
    k = min(right.size, wrong.size)
    keep = np.concatenate([np.sort(rng.choice(right, k, replace=False)), np.sort(rng.choice(wrong, k, replace=False))])
    keep = keep[rng.permutation(keep.size)]
    return [
        replace(samples[i], label2=int(not correct[i]), phase1_correct=int(correct[i]))
        for i in keep
    ]


def build_phase2_training_set(
    params: dict,
    cfg: ModelConfig,
    vocab: Vocabulary,
    source: Sequence[PairSample],
    seed: int,
    path: str | Path | None = None,
) -> list[PairSample]:
    """Classify ``source`` with the phase-1 model at 0.5 and relabel by its errors."""
    probs = predict_samples(params, cfg, vocab, source)
    out = relabel_by_errors(source, probs[:, PHASE1.positive_index] >= 0.5, seed)
    if path is not None:
        write_jsonl(out, path)
    return out


def sweep(prob_easy, is_easy) -> tuple[float, dict]:
    t, m = threshold_sweep(prob_easy, is_easy)
    return t, asdict(m)


def swap_consistency(params, cfg, vocab, samples: Sequence[PairSample]) -> float:
    """Fraction of pairs whose argmax is unchanged when alpha and beta trade places."""
    fwd = predict_samples(params, cfg, vocab, samples).argmax(1)
    swapped = [replace(s, alpha=s.beta, beta=s.alpha) for s in samples]
    back = predict_samples(params, cfg, vocab, swapped).argmax(1)
    return float(np.mean(fwd == back))


def write_report(report: MetricsReport, path: str | Path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = report.to_json()
    if extra:
        body.update(extra)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path
