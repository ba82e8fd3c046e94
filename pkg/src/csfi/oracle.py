"""Ground-truth syntactic isomorphism for monotone CNF formulas.

Two formulas are isomorphic when some injective renaming of the first one's
symbols turns it into the second, up to clause and literal order. The exact
decision procedure is a backtracking search over symbol assignments; a
brute-force enumerator is kept alongside as an independent reference.
"""
from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .cnf import (
    Category,
    Formula,
    apply_renaming,
    formula_equal_as_multiset,
    trivial_signature,
)

DEFAULT_NODE_BUDGET = 10**7
BRUTEFORCE_MAX_SYMBOLS = 9


class TrivialReason(str, enum.Enum):
    CLAUSE_COUNT = "clause_count"
    CARDINALITY_MULTISET = "cardinality_multiset"
    SYMBOL_COUNT = "symbol_count"
    OCCURRENCE_MULTISET = "occurrence_multiset"


class UndecidedError(RuntimeError):
    """The search exhausted its node budget without reaching a verdict."""


class OracleRefusal(ValueError):
    pass


@dataclass(frozen=True)
class OracleVerdict:
    isomorphic: bool
    witness: dict[str, str] | None = None
    trivial_reason: TrivialReason | None = None
    nodes: int = 0


def detect_trivial_noniso(alpha: Formula, beta: Formula) -> TrivialReason | None:
    """First differing signature component, or ``None`` if the signatures agree."""
    sa, sb = trivial_signature(alpha), trivial_signature(beta)
    for reason in TrivialReason:
        if getattr(sa, reason.value) != getattr(sb, reason.value):
            return reason
    return None


def _check_witness(alpha: Formula, beta: Formula, witness: dict[str, str]) -> None:
    if not formula_equal_as_multiset(apply_renaming(alpha, witness), beta):
        raise AssertionError("oracle produced an invalid witness")


def is_isomorphic_bruteforce(alpha: Formula, beta: Formula) -> OracleVerdict:
    """Decide isomorphism by trying every bijection between the symbol sets.

    Permutations are checked in lexicographic order, vectorised: each clause is
    a bitmask and a candidate bijection succeeds when the sorted image masks of
    alpha's clauses equal beta's sorted masks.
    """
    sym_a, sym_b = sorted(alpha.symbols), sorted(beta.symbols)
    if max(len(sym_a), len(sym_b)) > BRUTEFORCE_MAX_SYMBOLS:
        raise OracleRefusal(
            f"brute force limited to {BRUTEFORCE_MAX_SYMBOLS} symbols, "
            f"got {max(len(sym_a), len(sym_b))}"
        )
    if not (alpha.is_monotone and beta.is_monotone):
        raise ValueError("the oracle handles monotone formulas only")
    if len(sym_a) != len(sym_b) or len(alpha.clauses) != len(beta.clauses):
        return OracleVerdict(False)
    n = len(sym_a)
    ia = {s: i for i, s in enumerate(sym_a)}
    ib = {s: i for i, s in enumerate(sym_b)}
    incidence = np.zeros((len(alpha.clauses), n), dtype=np.int64)
    for ci, c in enumerate(alpha.clauses):
        incidence[ci, [ia[x] for x in c]] = 1
    target = np.sort([sum(1 << ib[x] for x in c) for c in beta.clauses])
    perms = itertools.permutations(range(n))
    nodes = 0
    while True:
        chunk = np.array(list(itertools.islice(perms, 40320)), dtype=np.int64).reshape(-1, n)
        if chunk.shape[0] == 0:
            return OracleVerdict(False, nodes=nodes)
        images = np.sort((1 << chunk) @ incidence.T, axis=1)
        hits = np.flatnonzero((images == target).all(axis=1))
        if hits.size:
            perm = chunk[hits[0]]
            nodes += int(hits[0]) + 1
            witness = {sym_a[i]: sym_b[int(perm[i])] for i in range(n)}
            _check_witness(alpha, beta, witness)
            return OracleVerdict(True, witness, nodes=nodes)
        nodes += chunk.shape[0]


class _Side:
    """Index structures for one formula of the pair."""

    def __init__(self, f: Formula):
        self.symbols = sorted(f.symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.clauses = [frozenset(self.index[x] for x in c) for c in f.clauses]
        n = len(self.symbols)
        self.member_of: list[list[int]] = [[] for _ in range(n)]
        for ci, c in enumerate(self.clauses):
            for s in c:
                self.member_of[s].append(ci)
        self.cooc = [[0] * n for _ in range(n)]
        for c in self.clauses:
            for s in c:
                row = self.cooc[s]
                for t in c:
                    row[t] += 1

    def profiles(self) -> list[tuple]:
        return [
            (len(cs), tuple(sorted(len(self.clauses[c]) for c in cs)))
            for cs in self.member_of
        ]


def _refine(a: _Side, b: _Side) -> tuple[list[int], list[int]] | None:
    """Joint colour refinement of the symbol/clause incidence graphs.

    Starts from the symbol profiles and clause cardinalities. Returns per-symbol
    colours for both sides, or ``None`` when the colour histograms diverge,
    which proves non-isomorphism.
    """
    def relabel(sig_a, sig_b):
        table = {s: i for i, s in enumerate(sorted(set(sig_a) | set(sig_b)))}
        return [table[s] for s in sig_a], [table[s] for s in sig_b]

    sym_a, sym_b = relabel(a.profiles(), b.profiles())
    cl_a, cl_b = relabel([len(c) for c in a.clauses], [len(c) for c in b.clauses])
    n_classes = -1
    while True:
        if Counter(sym_a) != Counter(sym_b) or Counter(cl_a) != Counter(cl_b):
            return None
        current = len(set(sym_a) | set(sym_b)) + len(set(cl_a) | set(cl_b))
        if current == n_classes:
            return sym_a, sym_b
        n_classes = current
        cl_a, cl_b = relabel(
            [(cl_a[i], tuple(sorted(sym_a[s] for s in c))) for i, c in enumerate(a.clauses)],
            [(cl_b[i], tuple(sorted(sym_b[s] for s in c))) for i, c in enumerate(b.clauses)],
        )
        sym_a, sym_b = relabel(
            [(sym_a[s], tuple(sorted(cl_a[c] for c in a.member_of[s]))) for s in range(len(sym_a))],
            [(sym_b[s], tuple(sorted(cl_b[c] for c in b.member_of[s]))) for s in range(len(sym_b))],
        )


def _search_order(a: _Side, colour: list[int]) -> list[int]:
    """Small colour classes first, then symbols most tied to those already placed."""
    class_size = Counter(colour)
    n = len(colour)
    order: list[int] = []
    placed = [False] * n
    links = [0] * n
    for _ in range(n):
        best = min(
            (s for s in range(n) if not placed[s]),
            key=lambda s: (-links[s], class_size[colour[s]], s),
        )
        order.append(best)
        placed[best] = True
        for t in range(n):
            if a.cooc[best][t] and t != best:
                links[t] += 1
    return order


def is_isomorphic(
    alpha: Formula, beta: Formula, node_budget: int = DEFAULT_NODE_BUDGET
) -> OracleVerdict:
    """Exact isomorphism decision with a witness renaming on success.

    Raises :class:`UndecidedError` if more than ``node_budget`` candidate
    assignments are tried.
    """
    if not (alpha.is_monotone and beta.is_monotone):
        raise ValueError("the oracle handles monotone formulas only")
    reason = detect_trivial_noniso(alpha, beta)
    if reason is not None:
        return OracleVerdict(False, trivial_reason=reason)

    a, b = _Side(alpha), _Side(beta)
    colours = _refine(a, b)
    if colours is None:
        return OracleVerdict(False)
    col_a, col_b = colours
    n = len(a.symbols)
    candidates: dict[int, list[int]] = {}
    for t in range(n):
        candidates.setdefault(col_b[t], []).append(t)

    order = _search_order(a, col_a)
    step_of = {s: i for i, s in enumerate(order)}
    # clauses of alpha that become fully assigned at each search step
    completes: list[list[int]] = [[] for _ in range(n)]
    for ci, c in enumerate(a.clauses):
        completes[max(step_of[s] for s in c)].append(ci)
    available = Counter(b.clauses)

    image = [-1] * n
    used = [False] * n
    nodes = 0

    def extend(step: int) -> bool:
        nonlocal nodes
        if step == n:
            return True
        s = order[step]
        row_a = a.cooc[s]
        for t in candidates[col_a[s]]:
            if used[t]:
                continue
            nodes += 1
            if nodes > node_budget:
                raise UndecidedError(f"node budget {node_budget} exceeded")
            row_b = b.cooc[t]
            if row_a[s] != row_b[t]:
                continue
            if any(row_a[p] != row_b[image[p]] for p in order[:step]):
                continue
            image[s] = t
            used[t] = True
            taken = []
            ok = True
            for ci in completes[step]:
                target = frozenset(image[x] for x in a.clauses[ci])
                if available[target] <= 0:
                    ok = False
                    break
                available[target] -= 1
                taken.append(target)
            if ok and extend(step + 1):
                return True
            for target in taken:
                available[target] += 1
            image[s] = -1
            used[t] = False
        return False

    if not extend(0):
        return OracleVerdict(False, nodes=nodes)
    witness = {a.symbols[s]: b.symbols[image[s]] for s in range(n)}
    _check_witness(alpha, beta, witness)
    return OracleVerdict(True, witness, nodes=nodes)


def classify_pair(
    alpha: Formula, beta: Formula, node_budget: int = DEFAULT_NODE_BUDGET
) -> Category:
    verdict = is_isomorphic(alpha, beta, node_budget)
    if verdict.isomorphic:
        return Category.ISO
    if verdict.trivial_reason is not None:
        return Category.TRIVIAL
    return Category.NONTRIVIAL
