"""Command-line entry point: ``csfi <subcommand> [--config run.json] [flags]``.

Every option can come from a JSON config file (keys spelled like the long
flags, with underscores); flags given on the command line win. Each run writes
``manifest.json`` next to its outputs with the resolved options, their hash,
the seed and library versions. Failures print a JSON object to stderr and exit
nonzero. The log level is read from ``CSFI_LOG_LEVEL``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from .cnf import Category
from .dataset import read_jsonl, write_jsonl
from .generator import DatasetSpec, GenParams, generate_samples, phase2_eval_samples
from .metrics import export_curves, threshold_report, threshold_sweep
from .model import ModelConfig
from .oracle import classify_pair, is_isomorphic
from .pipeline import (
    PHASE1,
    PHASE2,
    TrainConfig,
    build_phase2_training_set,
    evaluate,
    load_model,
    load_records,
    predict_samples,
    swap_consistency,
    train,
    write_report,
)
from .tokenizer import vocabulary_from_samples

LOG_ENV = "CSFI_LOG_LEVEL"
TASKS = {"phase1": PHASE1, "phase2": PHASE2}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _pair(text, cast=int):
    lo, hi = (cast(x) for x in str(text).split(","))
    return lo, hi


def _split(text) -> dict[Category, float]:
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 3:
        raise CliError("--split needs three fractions: iso,trivial,nontrivial")
    return dict(zip(Category, parts))


# ----------------------------------------------------------------- arguments


def _gen_args(p):
    p.add_argument("--pool", help="symbol pool as one string of letters, e.g. abcdefgh")
    p.add_argument("--symbols-range", help="min,max distinct symbols per formula")
    p.add_argument("--clauses-range", help="min,max clauses per formula")
    p.add_argument("--clause-cardinality", type=int)
    p.add_argument("--swaps-range", help="min,max occurrence swaps for non-trivial pairs")
    p.add_argument("--workers", type=int)


def _model_args(p):
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--ff-dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--full-scale", action="store_true", default=None)


def _train_args(p):
    p.add_argument("--train", help="training JSONL")
    p.add_argument("--eval", help="evaluation JSONL")
    p.add_argument("--out-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--warmup-steps", type=int)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--head-mode", choices=["concat", "symmetric"])
    p.add_argument("--thresholds")
    _model_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csfi", description="Formula isomorphism datasets, models and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON file with default values for any flag")
        p.add_argument("--seed", type=int)
        return p

    p = add("gen-dataset", "generate a phase-1 or phase-2 evaluation dataset")
    p.add_argument("--kind", choices=["phase1", "phase2-eval"])
    p.add_argument("--total", type=int)
    p.add_argument("--split", help="iso,trivial,nontrivial fractions (phase1 only)")
    p.add_argument("--out")
    _gen_args(p)

    p = add("oracle-check", "decide isomorphism for every pair of a JSONL file")
    p.add_argument("--pairs")
    p.add_argument("--out", help="write verdicts here instead of stdout")
    p.add_argument("--node-budget", type=int)

    add_train = add("train-phase1", "train the isomorphism classifier")
    _train_args(add_train)
    p = add("train-phase2", "train the hardness classifier")
    _train_args(p)

    p = add("build-phase2", "relabel a dataset by the errors of a phase-1 model")
    p.add_argument("--checkpoint")
    p.add_argument("--source")
    p.add_argument("--out")

    p = add("evaluate", "threshold metrics and per-category table for a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--thresholds")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--probs-out", help="also save per-sample probabilities as CSV")

    p = add("sweep", "best-F1 threshold from a saved probability CSV")
    p.add_argument("--probs")
    p.add_argument("--out")

    p = add("export-curves", "write the training curves of a run as CSV (and SVG)")
    p.add_argument("--run-dir")
    p.add_argument("--out")
    p.add_argument("--timing", action="store_true", default=None, help="include the wall_time column")
    p.add_argument("--svg", help="optional line chart of losses and F1")
    return parser


DEFAULTS = {
    "kind": "phase1",
    "split": "0.5,0.25,0.25",
    "workers": 1,
    "node_budget": 10**7,
    "task": "phase1",
    "thresholds": "0.5,0.66,best",
    "timing": False,
    "full_scale": False,
}
REQUIRED = {
    "gen-dataset": ["seed", "total", "out"],
    "oracle-check": ["pairs"],
    "train-phase1": ["seed", "train", "eval", "out_dir"],
    "train-phase2": ["seed", "train", "eval", "out_dir"],
    "build-phase2": ["seed", "checkpoint", "source", "out"],
    "evaluate": ["checkpoint", "data", "out"],
    "sweep": ["probs", "out"],
    "export-curves": ["run_dir", "out"],
}


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    opts = {k: v for k, v in DEFAULTS.items() if k in flags}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(flags)
        if unknown:
            raise CliError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        opts.update(loaded)
    opts.update({k: v for k, v in flags.items() if v is not None})
    missing = [k for k in REQUIRED[args.command] if opts.get(k) is None]
    if missing:
        raise CliError(f"{args.command} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


# ------------------------------------------------------------------ manifest


def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__}
    try:
        out["csfi"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["csfi"] = "unknown"
    return out


def write_manifest(path: Path, command: str, opts: dict, outputs: list[str]) -> Path:
    canonical = json.dumps({"command": command, "options": opts}, sort_keys=True)
    manifest = {
        "command": command,
        "options": opts,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": opts.get("seed"),
        "outputs": outputs,
        "versions": _versions(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _manifest_for_file(path: str, command: str, opts: dict) -> None:
    p = Path(path)
    write_manifest(p.with_name(p.name + ".manifest.json"), command, opts, [p.name])


# ------------------------------------------------------------------ commands


def _gen_params(opts) -> GenParams:
    kw = {"seed": opts["seed"]}
    if opts.get("pool"):
        kw["pool"] = tuple(opts["pool"])
    for key in ("symbols_range", "clauses_range", "swaps_range"):
        if opts.get(key) is not None:
            kw[key] = _pair(opts[key])
    if opts.get("clause_cardinality") is not None:
        kw["clause_cardinality"] = opts["clause_cardinality"]
    return GenParams(**kw)


def cmd_gen_dataset(opts) -> dict:
    params = _gen_params(opts)
    if opts["kind"] == "phase1":
        samples = generate_samples(DatasetSpec(opts["total"], _split(opts["split"]), params), opts["workers"])
    else:
        samples = phase2_eval_samples(opts["total"], params, opts["workers"])
    write_jsonl(samples, opts["out"])
    _manifest_for_file(opts["out"], "gen-dataset", opts)
    return {"out": opts["out"], "samples": len(samples)}


def cmd_oracle_check(opts) -> dict:
    lines = []
    summary = {"isomorphic": 0, "non_isomorphic": 0}
    for s in read_jsonl(opts["pairs"]):
        verdict = is_isomorphic(s.alpha, s.beta, opts["node_budget"])
        category = classify_pair(s.alpha, s.beta, opts["node_budget"])
        summary["isomorphic" if verdict.isomorphic else "non_isomorphic"] += 1
        lines.append(json.dumps({
            "id": s.id,
            "isomorphic": verdict.isomorphic,
            "category": category.value,
            "trivial_reason": verdict.trivial_reason.value if verdict.trivial_reason else None,
            "witness": verdict.witness,
            "agrees_with_label": int(verdict.isomorphic) == s.label,
        }, sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if opts.get("out"):
        Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(opts["out"]).write_text(text)
        _manifest_for_file(opts["out"], "oracle-check", opts)
    else:
        sys.stdout.write(text)
    return summary


def _model_config(opts, vocab_size: int) -> ModelConfig:
    if opts.get("full_scale"):
        cfg = ModelConfig.full_scale(vocab_size)
    else:
        cfg = ModelConfig(vocab_size)
    mapping = {"layers": "num_layers", "heads": "num_heads", "dim": "model_dim", "ff_dim": "ff_dim",
               "dropout": "dropout_rate", "max_len": "max_len"}
    kw = {field: opts[key] for key, field in mapping.items() if opts.get(key) is not None}
    kw["seed"] = opts["seed"]
    return ModelConfig(**{**asdict(cfg), **kw})


def _train_config(opts) -> TrainConfig:
    mapping = {"epochs": "epochs", "batch_size": "batch_size", "lr": "learning_rate",
               "warmup_steps": "warmup_steps", "weight_decay": "weight_decay", "eval_every": "eval_every",
               "head_mode": "head_mode"}
    kw = {field: opts[key] for key, field in mapping.items() if opts.get(key) is not None}
    kw["thresholds"] = tuple(str(opts["thresholds"]).split(","))
    return TrainConfig(seed=opts["seed"], **kw)


def _train(opts, task, command) -> dict:
    train_set, eval_set = read_jsonl(opts["train"]), read_jsonl(opts["eval"])
    vocab = vocabulary_from_samples(list(train_set) + list(eval_set))
    cfg = _model_config(opts, len(vocab))
    result = train(cfg, train_set, eval_set, _train_config(opts), vocab, task, opts["out_dir"])
    out = Path(opts["out_dir"])
    write_manifest(out / "manifest.json", command, opts, sorted(p.name for p in out.iterdir() if p.name != "manifest.json"))
    best = result.records[result.best_index]
    return {"out_dir": str(out), "best_epoch": best.epoch, "best_accuracy": best.eval_accuracy,
            "final_f1": result.records[-1].eval_f1}


def cmd_train_phase1(opts) -> dict:
    return _train(opts, PHASE1, "train-phase1")


def cmd_train_phase2(opts) -> dict:
    return _train(opts, PHASE2, "train-phase2")


def cmd_build_phase2(opts) -> dict:
    params, cfg, vocab = load_model(opts["checkpoint"])
    out = build_phase2_training_set(params, cfg, vocab, read_jsonl(opts["source"]), opts["seed"], opts["out"])
    _manifest_for_file(opts["out"], "build-phase2", opts)
    return {"out": opts["out"], "samples": len(out), "hard": sum(s.label2 for s in out)}


def cmd_evaluate(opts) -> dict:
    task = TASKS[opts["task"]]
    params, cfg, vocab = load_model(opts["checkpoint"])
    samples = read_jsonl(opts["data"])
    probs = predict_samples(params, cfg, vocab, samples)
    report = evaluate(params, cfg, vocab, samples, task, opts["thresholds"], probs=probs)
    extra = {"task": task.name, "head_mode": cfg.head_mode,
             "swap_consistency": swap_consistency(params, cfg, vocab, samples)}
    write_report(report, opts["out"], extra)
    if opts.get("probs_out"):
        with open(opts["probs_out"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "category", "p_positive", "positive"])
            y = [getattr(s, task.target) for s in samples]
            for s, p, label in zip(samples, probs[:, task.positive_index], y):
                w.writerow([s.id, s.category.value, repr(float(p)), int(label == task.positive_index)])
    _manifest_for_file(opts["out"], "evaluate", opts)
    return {"out": opts["out"], "rows": [(r.name, r.threshold, r.f1) for r in report.rows]}


def cmd_sweep(opts) -> dict:
    with open(opts["probs"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CliError(f"{opts['probs']} holds no probabilities")
    p = np.array([float(r["p_positive"]) for r in rows])
    y = np.array([r["positive"] == "1" for r in rows])
    t, _ = threshold_sweep(p, y)
    report = threshold_report(p, y, ["0.5", "0.66", "best"])
    write_report(report, opts["out"], {"best_threshold": t})
    _manifest_for_file(opts["out"], "sweep", opts)
    return {"out": opts["out"], "best_threshold": t, "best_f1": report.row("best").f1}


def _svg(records, path: Path) -> None:
    """Minimal line chart: losses on top, per-threshold F1 below."""
    width, height, pad = 640, 480, 40
    epochs = [r.epoch + i * 1e-9 for i, r in enumerate(records)]
    panels = [
        ("loss", {"train_loss": [r.train_loss for r in records], "eval_loss": [r.eval_loss for r in records]}),
        ("F1", {f"f1@{n}": [r.eval_f1[n] for r in records] for n in records[0].eval_f1}),
    ]
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    panel_h = (height - 3 * pad) / 2
    for k, (title, series) in enumerate(panels):
        top = pad + k * (panel_h + pad)
        values = [v for s in series.values() for v in s]
        lo, hi = min(values), max(values)
        hi = hi if hi > lo else lo + 1.0
        x0, x1 = min(epochs), max(epochs)
        x1 = x1 if x1 > x0 else x0 + 1.0
        parts.append(f'<text x="{pad}" y="{top - 8}" font-size="12">{title}</text>')
        parts.append(f'<rect x="{pad}" y="{top}" width="{width - 2 * pad}" height="{panel_h}" '
                     'fill="none" stroke="#999"/>')
        for j, (name, ys) in enumerate(series.items()):
            pts = " ".join(
                f"{pad + (x - x0) / (x1 - x0) * (width - 2 * pad):.1f},{top + (1 - (y - lo) / (hi - lo)) * panel_h:.1f}"
                for x, y in zip(epochs, ys)
            )
            c = colours[j % len(colours)]
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
            parts.append(f'<text x="{width - pad - 90}" y="{top + 14 + 14 * j}" font-size="11" fill="{c}">{name}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def cmd_export_curves(opts) -> dict:
    records = load_records(Path(opts["run_dir"]) / "records.json")
    out = export_curves(records, opts["out"], include_timing=bool(opts["timing"]))
    written = [out.name]
    if opts.get("svg"):
        _svg(records, Path(opts["svg"]))
        written.append(Path(opts["svg"]).name)
    _manifest_for_file(opts["out"], "export-curves", opts)
    return {"out": str(out), "rows": len(records), "written": written}


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "oracle-check": cmd_oracle_check,
    "train-phase1": cmd_train_phase1,
    "train-phase2": cmd_train_phase2,
    "build-phase2": cmd_build_phase2,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "export-curves": cmd_export_curves,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get(LOG_ENV, "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args = build_parser().parse_args(argv)
        opts = resolve_options(args)
        summary = COMMANDS[args.command](opts)
    except Exception as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2 if isinstance(exc, CliError) else 1
    if args.command != "oracle-check" or opts.get("out"):
        print(json.dumps(summary, sort_keys=True))
    return 0
