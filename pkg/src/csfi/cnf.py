"""Monotone CNF formulas: data model, text format, renamings and signatures.

Text grammar (whitespace ignored)::

    formula := clause ("&" clause)*
    clause  := "(" literal ("|" literal)* ")"
    literal := ["~"] symbol
    symbol  := letter digit*

The Unicode glyphs for and/or/not are accepted on input; output always uses
the ASCII operators so dataset files stay byte-stable.
"""
from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

DEFAULT_POOL: tuple[str, ...] = tuple("abcdefghijklmnopqrstuvwxy")

_SYMBOL_RE = re.compile(r"[A-Za-z][0-9]*")
_UNICODE_OPS = str.maketrans({"∧": "&", "∨": "|", "¬": "~"})


class ParseError(ValueError):
    """Malformed formula text. ``position`` is a character offset, ``clause`` 1-based."""

    def __init__(self, message: str, position: int, clause: int):
        super().__init__(f"{message} (clause {clause}, position {position})")
        self.position = position
        self.clause = clause


class RenamingError(ValueError):
    pass


def symbol_of(literal: str) -> str:
    return literal[1:] if literal.startswith("~") else literal


@dataclass(frozen=True)
class Formula:
    """A CNF as an ordered tuple of clauses; each clause a tuple of distinct literals."""

    clauses: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("formula needs at least one clause")
        for i, clause in enumerate(self.clauses, 1):
            if not clause:
                raise ValueError(f"clause {i} is empty")
            if len(set(clause)) != len(clause):
                raise ValueError(f"clause {i} repeats a literal")
            for lit in clause:
                if not _SYMBOL_RE.fullmatch(symbol_of(lit)):
                    raise ValueError(f"bad symbol {lit!r} in clause {i}")

    @classmethod
    def from_clauses(cls, clauses: Iterable[Iterable[str]]) -> "Formula":
        return cls(tuple(tuple(c) for c in clauses))

    @property
    def symbols(self) -> frozenset[str]:
        return frozenset(symbol_of(lit) for c in self.clauses for lit in c)

    @property
    def is_monotone(self) -> bool:
        return not any(lit.startswith("~") for c in self.clauses for lit in c)

    def __len__(self) -> int:
        return len(self.clauses)

    def __str__(self) -> str:
        return render_formula(self)


class Category(str, enum.Enum):
    ISO = "iso"
    TRIVIAL = "trivial"
    NONTRIVIAL = "nontrivial"


@dataclass(frozen=True)
class PairSample:
    """One labelled formula pair. ``label`` is 1 for isomorphic pairs.

    ``label2`` (hardness, 1 = hard) and ``phase1_correct`` are only set on
    phase-2 datasets.
    """

    id: int
    alpha: Formula
    beta: Formula
    category: Category
    label: int
    seed: int
    label2: int | None = None
    phase1_correct: int | None = None

    def __post_init__(self):
        if self.label != int(self.category is Category.ISO):
            raise ValueError(f"sample {self.id}: label {self.label} contradicts {self.category.value}")

    def to_json(self) -> dict:
        row = {
            "id": self.id,
            "alpha": render_formula(self.alpha),
            "beta": render_formula(self.beta),
            "category": self.category.value,
            "label": self.label,
        }
        if self.label2 is not None:
            row["label2"] = self.label2
        if self.phase1_correct is not None:
            row["phase1_correct"] = self.phase1_correct
        row["seed"] = self.seed
        return row

    @classmethod
    def from_json(cls, row: dict) -> "PairSample":
        return cls(
            id=int(row["id"]),
            alpha=parse_formula(row["alpha"]),
            beta=parse_formula(row["beta"]),
            category=Category(row["category"]),
            label=int(row["label"]),
            seed=int(row["seed"]),
            label2=row.get("label2"),
            phase1_correct=row.get("phase1_correct"),
        )


@dataclass(frozen=True, order=True)
class TrivialSignature:
    clause_count: int
    cardinality_multiset: tuple[int, ...]
    symbol_count: int
    occurrence_multiset: tuple[int, ...]


def parse_formula(text: str) -> Formula:
    """Parse ``text`` into a :class:`Formula`.

    >>> parse_formula("(a|b)&(a|c)").clauses
    (('a', 'b'), ('a', 'c'))
    """
    s = text.translate(_UNICODE_OPS)
    n = len(s)
    pos = 0
    clauses: list[tuple[str, ...]] = []

    def skip_ws(p: int) -> int:
        while p < n and s[p].isspace():
            p += 1
        return p

    while True:
        clause_no = len(clauses) + 1
        pos = skip_ws(pos)
        if pos >= n or s[pos] != "(":
            raise ParseError("expected '('", pos, clause_no)
        pos += 1
        literals: list[str] = []
        while True:
            pos = skip_ws(pos)
            neg = ""
            if pos < n and s[pos] == "~":
                neg = "~"
                pos = skip_ws(pos + 1)
            m = _SYMBOL_RE.match(s, pos)
            if m is None:
                raise ParseError("expected symbol", pos, clause_no)
            lit = neg + m.group()
            if lit in literals:
                raise ParseError(f"duplicate literal {lit!r}", pos, clause_no)
            literals.append(lit)
            pos = skip_ws(m.end())
            if pos < n and s[pos] == "|":
                pos += 1
                continue
            if pos < n and s[pos] == ")":
                pos += 1
                break
            raise ParseError("expected '|' or ')'", pos, clause_no)
        clauses.append(tuple(literals))
        pos = skip_ws(pos)
        if pos == n:
            break
        if s[pos] != "&":
            raise ParseError("expected '&' between clauses", pos, clause_no)
        pos += 1
    return Formula(tuple(clauses))


def render_formula(f: Formula) -> str:
    return "&".join("(" + "|".join(c) + ")" for c in f.clauses)


def apply_renaming(f: Formula, renaming: Mapping[str, str]) -> Formula:
    """Rename every symbol of ``f``; polarity and clause/literal order are kept."""
    missing = f.symbols - renaming.keys()
    if missing:
        raise RenamingError(f"renaming does not cover {sorted(missing)}")
    if len(set(renaming.values())) != len(renaming):
        raise RenamingError("renaming is not injective")

    def rename(lit: str) -> str:
        if lit.startswith("~"):
            return "~" + renaming[lit[1:]]
        return renaming[lit]

    return Formula(tuple(tuple(rename(lit) for lit in c) for c in f.clauses))


def invert_renaming(renaming: Mapping[str, str]) -> dict[str, str]:
    inverse = {v: k for k, v in renaming.items()}
    if len(inverse) != len(renaming):
        raise RenamingError("renaming is not injective")
    return inverse


def occurrence_counts(f: Formula) -> Counter:
    return Counter(symbol_of(lit) for c in f.clauses for lit in c)


def trivial_signature(f: Formula) -> TrivialSignature:
    occ = occurrence_counts(f)
    return TrivialSignature(
        clause_count=len(f.clauses),
        cardinality_multiset=tuple(sorted(len(c) for c in f.clauses)),
        symbol_count=len(occ),
        occurrence_multiset=tuple(sorted(occ.values())),
    )


def clause_multiset(f: Formula) -> Counter:
    return Counter(frozenset(c) for c in f.clauses)


def formula_equal_as_multiset(f: Formula, g: Formula) -> bool:
    """True iff ``f`` and ``g`` hold the same clauses, ignoring clause and literal order."""
    return len(f.clauses) == len(g.clauses) and clause_multiset(f) == clause_multiset(g)
