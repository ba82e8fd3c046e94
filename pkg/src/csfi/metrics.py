"""Confusion-matrix metrics, threshold sweeps and training curves."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cnf import Category

FIXED_THRESHOLDS = (0.5, 0.66)


@dataclass(frozen=True)
class ThresholdMetrics:
    """Metrics of one decision rule ``p(positive) >= threshold``.

    Precision is reported as 0 when nothing is predicted positive, and F1 as 0
    when precision and recall are both 0.
    """

    name: str
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)


def confusion_metrics(predicted, actual, name: str = "", threshold: float = float("nan")) -> ThresholdMetrics:
    """Metrics from boolean arrays of predicted and true positive membership."""
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    if predicted.size == 0:
        raise ValueError("cannot score an empty dataset")
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    tn = int(predicted.size - tp - fp - fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return ThresholdMetrics(
        name, float(threshold), tp, fp, tn, fn,
        accuracy=(tp + tn) / predicted.size,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
    )


def at_threshold(prob_positive, actual, threshold: float, name: str | None = None) -> ThresholdMetrics:
    prob_positive = np.asarray(prob_positive, dtype=np.float64)
    label = name if name is not None else f"{threshold:g}"
    return confusion_metrics(prob_positive >= threshold, actual, label, threshold)


def sweep_candidates(prob_positive) -> np.ndarray:
    """0, 1 and every midpoint between adjacent distinct probabilities, ascending."""
    u = np.unique(np.asarray(prob_positive, dtype=np.float64))
    mids = (u[:-1] + u[1:]) / 2.0
    return np.unique(np.concatenate([[0.0], mids, [1.0]]))


def threshold_sweep(prob_positive, actual) -> tuple[float, ThresholdMetrics]:
    """Threshold with the highest F1; ties go to the lowest threshold.

    Any threshold induces the same split as one of :func:`sweep_candidates`,
    so this is the exact maximiser.
    """
    p = np.asarray(prob_positive, dtype=np.float64)
    y = np.asarray(actual, dtype=bool)
    if p.size == 0:
        raise ValueError("cannot sweep an empty set")
    cand = sweep_candidates(p)
    order = np.sort(p)
    # number of samples with p >= t, and positives among them
    pos_sorted = np.sort(p[y])
    n_pred = p.size - np.searchsorted(order, cand, side="left")
    tp = pos_sorted.size - np.searchsorted(pos_sorted, cand, side="left")
    precision = np.divide(tp, n_pred, out=np.zeros(cand.size), where=n_pred > 0)
    recall = tp / pos_sorted.size if pos_sorted.size else np.zeros(cand.size)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(cand.size), where=denom > 0)
    best = int(np.argmax(f1))
    t = float(cand[best])
    return t, at_threshold(p, y, t, name="best")


@dataclass
class MetricsReport:
    positive_class: str
    n: int
    rows: list[ThresholdMetrics]
    loss: float | None = None
    per_category: dict[str, dict[str, int]] | None = None

    def row(self, name: str) -> ThresholdMetrics:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "positive_class": self.positive_class,
            "n": self.n,
            "loss": self.loss,
            "thresholds": [asdict(r) for r in self.rows],
            "per_category": self.per_category,
        }


def parse_thresholds(spec: str | Iterable) -> list[str]:
    """Normalise ``"0.5,0.66,best"`` (or a list) into threshold names."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    names = []
    for item in items:
        item = str(item).strip()
        if item != "best":
            t = float(item)
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t} outside [0, 1]")
            item = f"{t:g}"
        names.append(item)
    return names


def threshold_report(prob_positive, actual, thresholds=("0.5", "0.66", "best"), positive_class="positive",
                     loss=None) -> MetricsReport:
    rows = []
    for name in parse_thresholds(thresholds):
        if name == "best":
            rows.append(threshold_sweep(prob_positive, actual)[1])
        else:
            rows.append(at_threshold(prob_positive, actual, float(name)))
    return MetricsReport(positive_class, int(np.size(actual)), rows, loss)


def per_category_table(categories: Sequence, correct: Sequence[bool]) -> dict[str, dict[str, int]]:
    """Right/wrong counts per sample category."""
    if len(categories) != len(correct):
        raise ValueError("categories and predictions differ in length")
    table = {c.value: {"right": 0, "wrong": 0} for c in Category}
    for cat, ok in zip(categories, correct):
        table[Category(cat).value]["right" if ok else "wrong"] += 1
    return table


def error_rates(table: dict[str, dict[str, int]]) -> dict[str, float]:
    return {
        c: (v["wrong"] / (v["right"] + v["wrong"]) if v["right"] + v["wrong"] else float("nan"))
        for c, v in table.items()
    }


@dataclass
class EpochRecord:
    epoch: int
    step: int
    train_loss: float
    eval_loss: float
    eval_accuracy: float
    eval_f1: dict[str, float] = field(default_factory=dict)
    best_threshold: float = float("nan")
    wall_time: float = 0.0

    @property
    def f1_min(self) -> float:
        return min(self.eval_f1.values())

    @property
    def f1_gap(self) -> float:
        return max(self.eval_f1.values()) - min(self.eval_f1.values())


def export_curves(records: Sequence[EpochRecord], path: str | Path, include_timing: bool = True) -> Path:
    """One CSV row per evaluation point.

    Columns cover the loss, accuracy, per-threshold F1, the minimum F1, the
    max-min F1 gap and the swept threshold. Floats are written with ``repr`` so
    they parse back exactly.
    """
    if not records:
        raise ValueError("no records to export")
    names = list(records[0].eval_f1)
    header = ["epoch", "step", "train_loss", "eval_loss", "eval_accuracy"]
    header += [f"f1@{n}" for n in names] + ["f1_min", "f1_gap", "best_threshold"]
    if include_timing:
        header.append("wall_time")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = [r.epoch, r.step, repr(r.train_loss), repr(r.eval_loss), repr(r.eval_accuracy)]
            row += [repr(r.eval_f1[n]) for n in names]
            row += [repr(r.f1_min), repr(r.f1_gap), repr(r.best_threshold)]
            if include_timing:
                row.append(repr(r.wall_time))
            w.writerow(row)
    return path


def read_curves(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
