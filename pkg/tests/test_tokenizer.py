import numpy as np
import pytest

from csfi.cnf import Formula, parse_formula, render_formula
from csfi.generator import GenParams, random_formula
from csfi.tokenizer import (
    BOS,
    EOS,
    PAD,
    TokenizerError,
    Vocabulary,
    build_vocabulary,
    decode,
    encode_formula,
    encode_pair,
    encode_pair_both,
)

from conftest import F

POOL_VOCAB = build_vocabulary([Formula.from_clauses([list(GenParams().pool)])])


def tokens(ids, v):
    return [v.token(i) for i in ids]


class TestVocabulary:
    def test_pool_corpus_size(self):
        assert len(POOL_VOCAB) == 4 + 2 + 25

    def test_empty_corpus(self):
        v = build_vocabulary([])
        assert v.tokens == ("<s>", "</s>", "<pad>", "<unk>", "&", "|")
        assert v.id(BOS) == 0 and v.id(EOS) == 1 and v.pad_id == 2

    def test_first_occurrence_order(self):
        v = build_vocabulary([F("(c|a)&(b|a)")])
        assert v.tokens[6:] == ("c", "a", "b")

    def test_deterministic(self):
        corpus = [random_formula(GenParams(), np.random.default_rng(i)) for i in range(5)]
        assert build_vocabulary(corpus) == build_vocabulary(corpus)

    def test_cap(self):
        names = [f"x{i}" for i in range(95)]
        with pytest.raises(TokenizerError):
            build_vocabulary([Formula.from_clauses([names])])

    def test_json_round_trip(self, tmp_path):
        POOL_VOCAB.save(tmp_path / "v.json")
        assert Vocabulary.load(tmp_path / "v.json") == POOL_VOCAB


class TestEncode:
    def test_example_sequence(self):
        f = parse_formula("(a ∨ c) ∧ (c ∨ b)")
        v = build_vocabulary([f])
        assert tokens(encode_formula(f, v), v) == ["<s>", "a", "|", "c", "&", "c", "|", "b", "</s>"]

    def test_single_literal(self):
        assert tokens(encode_formula(F("(a)"), POOL_VOCAB), POOL_VOCAB) == ["<s>", "a", "</s>"]

    def test_worst_case_formula_length(self):
        f = Formula.from_clauses([list("abcdefgh")] * 15)
        assert len(encode_formula(f, POOL_VOCAB)) == 15 * 15 + 14 + 2 == 241

    def test_unknown_symbol(self):
        with pytest.raises(TokenizerError):
            encode_formula(F("(z)"), build_vocabulary([F("(a)")]))


class TestPair:
    def test_worst_case_pair_fits(self):
        f = Formula.from_clauses([list("abcdefgh")] * 15)
        ids = encode_pair(f, f, POOL_VOCAB)
        assert len(ids) == 512
        assert sum(i != POOL_VOCAB.pad_id for i in ids) == 2 * 239 + 4

    def test_worst_trivial_pair_fits(self):
        # a 15-clause formula against its 16-clause "add clause" variant
        f = Formula.from_clauses([list("abcdefgh")] * 15)
        g = Formula.from_clauses([list("abcdefgh")] * 16)
        ids = encode_pair(f, g, POOL_VOCAB)
        assert sum(i != POOL_VOCAB.pad_id for i in ids) == 239 + 255 + 4 == 498

    def test_single_symbols(self):
        ids = encode_pair(F("(a)"), F("(b)"), POOL_VOCAB, max_len=10)
        assert tokens(ids, POOL_VOCAB) == ["<s>", "a", "</s>", "</s>", "b", "</s>"] + [PAD] * 4

    def test_orderings_swap_segments(self):
        a, b = F("(a|b)&(c)"), F("(d)")
        ab, ba = encode_pair_both(a, b, POOL_VOCAB, max_len=16)
        body_a = encode_formula(a, POOL_VOCAB)[1:-1]
        body_b = encode_formula(b, POOL_VOCAB)[1:-1]
        assert ab[1 : 1 + len(body_a)] == body_a
        assert ba[1 : 1 + len(body_b)] == body_b
        assert sorted(ab) == sorted(ba)

    def test_overflow_is_an_error(self):
        f = Formula.from_clauses([list("abcdefgh")] * 15)
        with pytest.raises(TokenizerError):
            encode_pair(f, f, POOL_VOCAB, max_len=481)


class TestDecode:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            f = random_formula(GenParams(), rng)
            assert decode(encode_formula(f, POOL_VOCAB), POOL_VOCAB) == render_formula(f)

    def test_minimal(self):
        v = POOL_VOCAB
        assert decode([v.id(BOS), v.id("a"), v.id(EOS)], v) == "(a)"

    def test_unknown_id(self):
        with pytest.raises(TokenizerError):
            decode([99], POOL_VOCAB)

    def test_pair(self):
        ids = encode_pair(F("(a|b)"), F("(c)&(d)"), POOL_VOCAB, max_len=20)
        assert decode(ids, POOL_VOCAB) == "(a|b) (c)&(d)"

    def test_injective_on_orderings(self):
        f, g = F("(a|b)&(c)"), F("(c)&(b|a)")
        assert encode_formula(f, POOL_VOCAB) != encode_formula(g, POOL_VOCAB)
