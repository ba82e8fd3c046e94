"""JSONL dataset files: one :class:`PairSample` object per line."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .cnf import PairSample


def dumps_sample(sample: PairSample) -> str:
    return json.dumps(sample.to_json(), separators=(",", ":"))


def write_jsonl(samples: Iterable[PairSample], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(dumps_sample(sample) + "\n")
    return path


def read_jsonl(path: str | Path) -> list[PairSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                samples.append(PairSample.from_json(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return samples
