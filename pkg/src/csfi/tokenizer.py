"""Symbol-level tokenization of formulas and formula pairs.

A formula becomes ``<s> a | c & c | b </s>``: literals and the two operators,
no parentheses. Clause boundaries stay recoverable because ``&`` only ever
separates clauses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cnf import Formula, PairSample, parse_formula

BOS, EOS, PAD, UNK = "<s>", "</s>", "<pad>", "<unk>"
SPECIALS = (BOS, EOS, PAD, UNK)
AND, OR = "&", "|"
OPERATORS = (AND, OR)
MAX_VOCAB = 100
MAX_LEN = 512


class TokenizerError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[: len(SPECIALS) + len(OPERATORS)] != SPECIALS + OPERATORS:
            raise TokenizerError("vocabulary must start with the special tokens and operators")
        if len(set(self.tokens)) != len(self.tokens):
            raise TokenizerError("duplicate token in vocabulary")
        if len(self.tokens) > MAX_VOCAB:
            raise TokenizerError(f"vocabulary size {len(self.tokens)} exceeds {MAX_VOCAB}")
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise TokenizerError(f"unknown token {token!r}") from None

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self.tokens):
            raise TokenizerError(f"unknown token id {idx}")
        return self.tokens[idx]

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    def to_json(self) -> dict[str, int]:
        return dict(self._ids)

    @classmethod
    def from_json(cls, table: dict[str, int]) -> "Vocabulary":
        tokens = sorted(table, key=table.__getitem__)
        if [table[t] for t in tokens] != list(range(len(tokens))):
            raise TokenizerError("vocabulary ids are not dense from 0")
        return cls(tuple(tokens))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_vocabulary(formulas: Iterable[Formula]) -> Vocabulary:
    """Specials, operators, then every literal in first-occurrence order."""
    tokens = list(SPECIALS + OPERATORS)
    seen = set(tokens)
    for f in formulas:
        for clause in f.clauses:
            for lit in clause:
                if lit not in seen:
                    seen.add(lit)
                    tokens.append(lit)
                    if len(tokens) > MAX_VOCAB:
                        raise TokenizerError(f"corpus needs more than {MAX_VOCAB} tokens")
    return Vocabulary(tuple(tokens))


def vocabulary_from_samples(samples: Iterable[PairSample]) -> Vocabulary:
    return build_vocabulary(f for s in samples for f in (s.alpha, s.beta))


def _body(f: Formula, v: Vocabulary) -> list[int]:
    or_id, and_id = v.id(OR), v.id(AND)
    out: list[int] = []
    for ci, clause in enumerate(f.clauses):
        if ci:
            out.append(and_id)
        for li, lit in enumerate(clause):
            if li:
                out.append(or_id)
            out.append(v.id(lit))
    return out


def encode_formula(f: Formula, v: Vocabulary) -> list[int]:
    return [v.id(BOS), *_body(f, v), v.id(EOS)]


def encode_pair(alpha: Formula, beta: Formula, v: Vocabulary, max_len: int = MAX_LEN) -> list[int]:
    """``<s> alpha </s> </s> beta </s>`` right-padded to ``max_len``; overflow is an error."""
    bos, eos = v.id(BOS), v.id(EOS)
    ids = [bos, *_body(alpha, v), eos, eos, *_body(beta, v), eos]
    if len(ids) > max_len:
        raise TokenizerError(f"encoded pair has {len(ids)} tokens, max_len is {max_len}")
    return ids + [v.pad_id] * (max_len - len(ids))


def encode_pair_both(alpha: Formula, beta: Formula, v: Vocabulary, max_len: int = MAX_LEN):
    """Both concatenation orders, ``(alpha+beta, beta+alpha)``."""
    return encode_pair(alpha, beta, v, max_len), encode_pair(beta, alpha, v, max_len)


def encode_samples(samples: Sequence[PairSample], v: Vocabulary, max_len: int = MAX_LEN):
    """Stack both orderings of every sample into two ``(n, max_len)`` int arrays."""
    ab = np.empty((len(samples), max_len), dtype=np.int32)
    ba = np.empty((len(samples), max_len), dtype=np.int32)
    for i, s in enumerate(samples):
        ab[i], ba[i] = encode_pair_both(s.alpha, s.beta, v, max_len)
    return ab, ba


def decode(ids: Sequence[int], v: Vocabulary) -> str:
    """Render token ids back to formula text, one formula per ``<s>...</s>`` span.

    Pads are dropped; a pair decodes to its two formulas joined by a space.
    """
    tokens = [v.token(int(i)) for i in ids]
    formulas: list[str] = []
    current: list[str] | None = None
    for tok in tokens:
        if tok == PAD:
            continue
        if tok in (BOS, EOS):
            if current:
                formulas.append(_render_body(current))
            current = []
            continue
        if current is None:
            current = []
        current.append(tok)
    if current:
        formulas.append(_render_body(current))
    return " ".join(formulas)


def _render_body(tokens: list[str]) -> str:
    text = "(" + "".join(")&(" if t == AND else t for t in tokens) + ")"
    parse_formula(text)
    return text
