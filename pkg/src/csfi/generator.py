"""Random formulas, the three pair categories, and dataset assembly.

Every sample owns a random stream seeded from ``(dataset_seed, index)``, so a
dataset is byte-identical regardless of how many worker processes build it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnf import (
    DEFAULT_POOL,
    Category,
    Formula,
    PairSample,
    apply_renaming,
)
from .dataset import write_jsonl
from .oracle import is_isomorphic

MAX_ATTEMPTS = 1000
TRIVIAL_RULES = ("add_clause", "grow_clause", "add_fresh_symbol")
CATEGORY_ORDER = (Category.ISO, Category.TRIVIAL, Category.NONTRIVIAL)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    pool: tuple[str, ...] = DEFAULT_POOL
    symbols_range: tuple[int, int] = (15, 25)
    clauses_range: tuple[int, int] = (10, 15)
    clause_cardinality: int = 8
    monotone: bool = True
    swaps_range: tuple[int, int] = (1, 3)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.symbols_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad symbols_range {self.symbols_range}")
        if not 1 <= self.clauses_range[0] <= self.clauses_range[1]:
            raise ValueError(f"bad clauses_range {self.clauses_range}")
        if hi > len(self.pool):
            raise ValueError("symbols_range exceeds the symbol pool")
        if len(set(self.pool)) != len(self.pool):
            raise ValueError("symbol pool has duplicates")
        if not 1 <= self.clause_cardinality <= lo:
            raise ValueError("clause_cardinality must not exceed the minimum symbol count")
        if not 1 <= self.swaps_range[0] <= self.swaps_range[1]:
            raise ValueError(f"bad swaps_range {self.swaps_range}")
        if not self.monotone:
            raise ValueError("only monotone generation is supported")


@dataclass(frozen=True)
class DatasetSpec:
    total_pairs: int
    fractions: dict = field(
        default_factory=lambda: {Category.ISO: 0.5, Category.TRIVIAL: 0.25, Category.NONTRIVIAL: 0.25}
    )
    params: GenParams = GenParams()

    def __post_init__(self):
        if self.total_pairs < 0:
            raise ValueError("total_pairs must be non-negative")
        fr = {Category(k): v for k, v in self.fractions.items()}
        object.__setattr__(self, "fractions", fr)
        if any(v < 0 for v in fr.values()):
            raise ValueError("negative fraction")
        if abs(sum(fr.values()) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(fr.values())}, expected 1")

    def counts(self) -> dict[Category, int]:
        return largest_remainder(self.total_pairs, self.fractions)


def largest_remainder(total: int, fractions: dict) -> dict[Category, int]:
    """Integer counts summing to ``total``; leftover units go to the largest
    remainders, ties broken by the fixed order iso, trivial, nontrivial."""
    cats = [c for c in CATEGORY_ORDER if c in fractions]
    exact = {c: Fraction(str(fractions[c])) * total for c in cats}
    counts = {c: int(exact[c]) for c in cats}
    leftover = total - sum(counts.values())
    by_remainder = sorted(cats, key=lambda c: (-(exact[c] - counts[c]), cats.index(c)))
    for c in by_remainder[:leftover]:
        counts[c] += 1
    return counts


def sample_seed(dataset_seed: int, index: int) -> int:
    """64-bit seed of sample ``index``; depends on nothing else."""
    ss = np.random.SeedSequence([dataset_seed & (2**64 - 1), index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_formula(p: GenParams, rng: np.random.Generator) -> Formula:
    """Clauses of ``p.clause_cardinality`` distinct pool symbols, listed in pool order.

    The clause count is uniform over ``p.clauses_range``; drafts whose distinct
    symbol count falls outside ``p.symbols_range`` are redrawn.
    """
    lo, hi = p.symbols_range
    for _ in range(MAX_ATTEMPTS):
        n_clauses = int(rng.integers(p.clauses_range[0], p.clauses_range[1] + 1))
        idx = [np.sort(rng.choice(len(p.pool), p.clause_cardinality, replace=False)) for _ in range(n_clauses)]
        distinct = len(set(np.concatenate(idx).tolist()))
        if lo <= distinct <= hi:
            return Formula(tuple(tuple(p.pool[i] for i in c) for c in idx))
    raise GenerationError(f"no conforming formula after {MAX_ATTEMPTS} attempts")


def random_renaming(f: Formula, p: GenParams, rng: np.random.Generator) -> dict[str, str]:
    """Uniform injective map from the symbols of ``f`` into the pool."""
    symbols = sorted(f.symbols)
    if len(symbols) > len(p.pool):
        raise GenerationError("formula has more symbols than the pool")
    image = rng.permutation(len(p.pool))[: len(symbols)]
    return {s: p.pool[i] for s, i in zip(symbols, image)}


def trivial_modification(f: Formula, rule: str, p: GenParams, rng: np.random.Generator) -> Formula:
    """Apply one signature-changing rule to ``f``.

    Raises :class:`GenerationError` when the rule cannot apply (no fresh pool
    symbol, or every clause already holds every symbol).
    """
    clauses = [list(c) for c in f.clauses]
    symbols = sorted(f.symbols, key=_pool_key(p))
    if rule == "add_clause":
        k = min(p.clause_cardinality, len(symbols))
        chosen = sorted(rng.choice(len(symbols), k, replace=False))
        at = int(rng.integers(0, len(clauses) + 1))
        clauses.insert(at, [symbols[i] for i in chosen])
    elif rule == "grow_clause":
        growable = [i for i, c in enumerate(clauses) if len(c) < len(symbols)]
        if not growable:
            raise GenerationError("every clause already contains every symbol")
        ci = growable[int(rng.integers(len(growable)))]
        options = [s for s in symbols if s not in clauses[ci]]
        clauses[ci].append(options[int(rng.integers(len(options)))])
    elif rule == "add_fresh_symbol":
        fresh = [s for s in p.pool if s not in f.symbols]
        if not fresh:
            raise GenerationError("formula already uses the whole pool")
        ci = int(rng.integers(len(clauses)))
        clauses[ci].append(fresh[int(rng.integers(len(fresh)))])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return Formula.from_clauses(clauses)


def occurrence_swap(f: Formula, rng: np.random.Generator) -> Formula | None:
    """Exchange a symbol of one clause with a symbol of another.

    Picks clauses i != j, ``u`` in clause i but not j, ``v`` in clause j but
    not i, and swaps them in place. Returns ``None`` if the drawn clauses admit
    no swap.
    """
    if len(f.clauses) < 2:
        return None
    i, j = (int(x) for x in rng.choice(len(f.clauses), 2, replace=False))
    ci, cj = f.clauses[i], f.clauses[j]
    only_i = [s for s in ci if s not in cj]
    only_j = [s for s in cj if s not in ci]
    if not only_i or not only_j:
        return None
    u = only_i[int(rng.integers(len(only_i)))]
    v = only_j[int(rng.integers(len(only_j)))]
    clauses = [list(c) for c in f.clauses]
    clauses[i][clauses[i].index(u)] = v
    clauses[j][clauses[j].index(v)] = u
    return Formula.from_clauses(clauses)


def _pool_key(p: GenParams):
    rank = {s: i for i, s in enumerate(p.pool)}
    return lambda s: (rank.get(s, len(rank)), s)


def make_iso_pair(p: GenParams, rng: np.random.Generator, id: int = 0, seed: int = 0) -> PairSample:
    alpha = random_formula(p, rng)
    beta = apply_renaming(alpha, random_renaming(alpha, p, rng))
    return PairSample(id, alpha, beta, Category.ISO, 1, seed)


def make_trivial_pair(
    p: GenParams,
    rng: np.random.Generator,
    id: int = 0,
    seed: int = 0,
    rule: str | None = None,
) -> PairSample:
    alpha = random_formula(p, rng)
    rules = list(TRIVIAL_RULES) if rule is None else [rule]
    while True:
        chosen = rules[int(rng.integers(len(rules)))]
        try:
            beta = trivial_modification(alpha, chosen, p, rng)
            break
        except GenerationError:
            rules.remove(chosen)
            if not rules:
                raise
    gamma = apply_renaming(beta, random_renaming(beta, p, rng))
    return PairSample(id, alpha, gamma, Category.TRIVIAL, 0, seed)


def make_nontrivial_pair(p: GenParams, rng: np.random.Generator, id: int = 0, seed: int = 0) -> PairSample:
    alpha = random_formula(p, rng)
    for _ in range(MAX_ATTEMPTS):
        k = int(rng.integers(p.swaps_range[0], p.swaps_range[1] + 1))
        beta = alpha
        for _ in range(k):
            swapped = occurrence_swap(beta, rng)
            if swapped is not None:
                beta = swapped
        if beta is alpha or is_isomorphic(alpha, beta).isomorphic:
            continue
        gamma = apply_renaming(beta, random_renaming(beta, p, rng))
        return PairSample(id, alpha, gamma, Category.NONTRIVIAL, 0, seed)
    raise GenerationError(f"no non-isomorphic swap found after {MAX_ATTEMPTS} attempts")


_MAKERS = {
    Category.ISO: make_iso_pair,
    Category.TRIVIAL: make_trivial_pair,
    Category.NONTRIVIAL: make_nontrivial_pair,
}


def make_sample(category: Category, p: GenParams, dataset_seed: int, index: int) -> PairSample:
    seed = sample_seed(dataset_seed, index)
    return _MAKERS[Category(category)](p, np.random.default_rng(seed), id=index, seed=seed)


def _make_sample_task(args):
    return make_sample(*args)


def generate_samples(spec: DatasetSpec, workers: int = 1) -> list[PairSample]:
    """All samples of ``spec`` in their final (seed-shuffled) order."""
    counts = spec.counts()
    categories = [c for c in CATEGORY_ORDER for _ in range(counts.get(c, 0))]
    order = np.random.default_rng(spec.params.seed).permutation(len(categories))
    tasks = [(categories[j], spec.params, spec.params.seed, i) for i, j in enumerate(order)]
    if workers > 1 and len(tasks) > 1:
        with Pool(workers) as pool:
            return pool.map(_make_sample_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
    return [make_sample(*t) for t in tasks]


def build_phase1_dataset(spec: DatasetSpec, path: str | Path, workers: int = 1) -> Path:
    return write_jsonl(generate_samples(spec, workers), path)


def phase2_eval_samples(total: int, params: GenParams, workers: int = 1) -> list[PairSample]:
    """Half trivial, half non-trivial pairs, with hardness labels attached
    (trivial -> 0 easy, non-trivial -> 1 hard)."""
    spec = DatasetSpec(total, {Category.TRIVIAL: 0.5, Category.NONTRIVIAL: 0.5}, params)
    out = []
    for s in generate_samples(spec, workers):
        hard = int(s.category is Category.NONTRIVIAL)
        out.append(PairSample(s.id, s.alpha, s.beta, s.category, s.label, s.seed, label2=hard))
    return out


def build_phase2_eval_dataset(total: int, params: GenParams, path: str | Path, workers: int = 1) -> Path:
    return write_jsonl(phase2_eval_samples(total, params, workers), path)


def category_counts(samples: Sequence[PairSample]) -> dict[Category, int]:
    counts = {c: 0 for c in CATEGORY_ORDER}
    for s in samples:
        counts[s.category] += 1
    return counts
