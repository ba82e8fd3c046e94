import itertools

import numpy as np
import pytest

from csfi.cnf import Category, Formula, apply_renaming, formula_equal_as_multiset, trivial_signature
from csfi.generator import (
    GenParams,
    make_iso_pair,
    make_nontrivial_pair,
    make_trivial_pair,
    occurrence_swap,
    random_formula,
    random_renaming,
    trivial_modification,
)
from csfi.oracle import (
    OracleRefusal,
    TrivialReason,
    UndecidedError,
    classify_pair,
    detect_trivial_noniso,
    is_isomorphic,
    is_isomorphic_bruteforce,
)

from conftest import F


def enumerate_bijections(alpha, beta):
    """Reference count of bijections mapping alpha onto beta (plain loops)."""
    sa, sb = sorted(alpha.symbols), sorted(beta.symbols)
    if len(sa) != len(sb):
        return 0
    return sum(
        formula_equal_as_multiset(apply_renaming(alpha, dict(zip(sa, img))), beta)
        for img in itertools.permutations(sb)
    )


def random_small_pair(p, rng):
    """Mix of iso, trivially modified, swapped and unrelated small pairs."""
    kind = int(rng.integers(4))
    alpha = random_formula(p, rng)
    if kind == 0:
        beta = alpha
    elif kind == 1:
        beta = trivial_modification(alpha, ("add_clause", "grow_clause")[int(rng.integers(2))], p, rng)
    elif kind == 2:
        beta = occurrence_swap(alpha, rng) or alpha
    else:
        beta = random_formula(p, rng)
    return alpha, apply_renaming(beta, random_renaming(beta, p, rng))


class TestTrivialDetection:
    def test_added_clause(self, default_params, rng):
        alpha = random_formula(default_params, rng)
        beta = trivial_modification(alpha, "add_clause", default_params, rng)
        assert detect_trivial_noniso(alpha, beta) is TrivialReason.CLAUSE_COUNT

    def test_grown_clause(self, default_params, rng):
        alpha = random_formula(default_params, rng)
        beta = trivial_modification(alpha, "grow_clause", default_params, rng)
        assert detect_trivial_noniso(alpha, beta) is TrivialReason.CARDINALITY_MULTISET

    def test_fresh_symbol_reports_cardinality_first(self, rng):
        p = GenParams(symbols_range=(8, 20), clauses_range=(2, 2))
        alpha = random_formula(p, rng)
        beta = trivial_modification(alpha, "add_fresh_symbol", p, rng)
        assert trivial_signature(alpha).symbol_count != trivial_signature(beta).symbol_count
        assert detect_trivial_noniso(alpha, beta) is TrivialReason.CARDINALITY_MULTISET

    def test_symbol_and_occurrence_reasons(self):
        assert detect_trivial_noniso(F("(a|b)&(c|d)"), F("(a|b)&(a|c)")) is TrivialReason.SYMBOL_COUNT
        assert detect_trivial_noniso(F("(a|b)&(a|c)&(d)"), F("(a|b)&(c|d)&(a)")) is None
        assert (
            detect_trivial_noniso(F("(a|b)&(a|c)&(a)"), F("(a|b)&(c|b)&(c)"))
            is TrivialReason.OCCURRENCE_MULTISET
        )

    def test_equal_signatures(self):
        assert detect_trivial_noniso(F("(a|b)"), F("(c|d)")) is None


class TestBruteForce:
    def test_example_witness(self):
        v = is_isomorphic_bruteforce(F("(a|b)&(a|c)"), F("(x|y)&(x|z)"))
        assert v.isomorphic
        assert v.witness in ({"a": "x", "b": "y", "c": "z"}, {"a": "x", "b": "z", "c": "y"})
        assert enumerate_bijections(F("(a|b)&(a|c)"), F("(x|y)&(x|z)")) == 2

    def test_self(self, small_params, rng):
        f = random_formula(small_params, rng)
        v = is_isomorphic_bruteforce(f, f)
        assert v.isomorphic and formula_equal_as_multiset(apply_renaming(f, v.witness), f)

    def test_different_symbol_counts(self):
        assert not is_isomorphic_bruteforce(F("(a|b)&(a|c)"), F("(x|y)&(z|w)")).isomorphic

    def test_refuses_large(self):
        f = F("(a|b|c|d|e|f|g|h|i|j)")
        with pytest.raises(OracleRefusal):
            is_isomorphic_bruteforce(f, f)

    def test_matches_plain_enumeration(self, small_params):
        rng = np.random.default_rng(7)
        for _ in range(40):
            a, b = random_small_pair(GenParams(pool=tuple("abcdef"), symbols_range=(3, 6),
                                               clauses_range=(2, 5), clause_cardinality=3), rng)
            assert is_isomorphic_bruteforce(a, b).isomorphic == (enumerate_bijections(a, b) > 0)


class TestSearch:
    def test_agrees_with_bruteforce(self, small_params):
        rng = np.random.default_rng(11)
        agree = 0
        for _ in range(200):
            a, b = random_small_pair(small_params, rng)
            fast, slow = is_isomorphic(a, b), is_isomorphic_bruteforce(a, b)
            assert fast.isomorphic == slow.isomorphic, (a, b)
            agree += 1
        assert agree == 200

    def test_iso_pairs_at_full_size(self, default_params, rng):
        for _ in range(50):
            s = make_iso_pair(default_params, rng)
            v = is_isomorphic(s.alpha, s.beta)
            assert v.isomorphic
            assert formula_equal_as_multiset(apply_renaming(s.alpha, v.witness), s.beta)

    def test_trivial_pairs_report_reason(self, default_params, rng):
        for _ in range(50):
            s = make_trivial_pair(default_params, rng)
            v = is_isomorphic(s.alpha, s.beta)
            assert not v.isomorphic and v.trivial_reason is not None

    def test_symmetry(self, small_params):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a, b = random_small_pair(small_params, rng)
            assert is_isomorphic(a, b).isomorphic == is_isomorphic(b, a).isomorphic

    def test_transitivity_chain(self, default_params, rng):
        for _ in range(30):
            alpha = random_formula(default_params, rng)
            beta = apply_renaming(alpha, random_renaming(alpha, default_params, rng))
            gamma = apply_renaming(beta, random_renaming(beta, default_params, rng))
            assert is_isomorphic(alpha, beta).isomorphic and is_isomorphic(beta, gamma).isomorphic
            assert is_isomorphic(alpha, gamma).isomorphic

    def test_budget_exceeded_is_an_error(self):
        f = F("(a|b)&(c|d)&(e|f)&(g|h)")
        g = F("(h|g)&(f|e)&(d|c)&(b|a)")
        assert is_isomorphic(f, g).isomorphic
        with pytest.raises(UndecidedError):
            is_isomorphic(f, g, node_budget=2)

    def test_rejects_negation(self):
        with pytest.raises(ValueError):
            is_isomorphic(F("(~a|b)"), F("(a|b)"))

    def test_duplicate_clauses(self):
        assert is_isomorphic(F("(a|b)&(a|b)&(c)"), F("(x|z)&(y)&(z|x)")).isomorphic
        assert not is_isomorphic(F("(a|b)&(a|b)&(c|d)"), F("(a|b)&(c|d)&(c|d)&(a|b)")).isomorphic


class TestClassify:
    def test_self_is_iso(self, default_params, rng):
        f = random_formula(default_params, rng)
        assert classify_pair(f, f) is Category.ISO

    def test_extra_clause_is_trivial(self, default_params, rng):
        f = random_formula(default_params, rng)
        g = trivial_modification(f, "add_clause", default_params, rng)
        assert classify_pair(f, g) is Category.TRIVIAL

    def test_generated_nontrivial(self, default_params, rng):
        for _ in range(20):
            s = make_nontrivial_pair(default_params, rng)
            assert classify_pair(s.alpha, s.beta) is Category.NONTRIVIAL
