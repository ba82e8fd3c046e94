import hashlib
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from csfi.cnf import Category, Formula, render_formula, trivial_signature
from csfi.dataset import read_jsonl
from csfi.generator import (
    DatasetSpec,
    GenerationError,
    GenParams,
    build_phase1_dataset,
    build_phase2_eval_dataset,
    category_counts,
    generate_samples,
    largest_remainder,
    make_iso_pair,
    make_nontrivial_pair,
    make_sample,
    make_trivial_pair,
    random_formula,
    random_renaming,
    sample_seed,
)
from csfi.oracle import classify_pair, detect_trivial_noniso, is_isomorphic

from conftest import F


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"symbols_range": (20, 15)},
            {"symbols_range": (15, 26)},
            {"clause_cardinality": 16},
            {"clauses_range": (0, 3)},
            {"monotone": False},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            GenParams(**kw)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DatasetSpec(10, {"iso": 0.5, "trivial": 0.25})


class TestRandomFormula:
    def test_default_parameters(self, default_params):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            f = random_formula(default_params, rng)
            assert 10 <= len(f.clauses) <= 15
            assert all(len(c) == 8 for c in f.clauses)
            assert 15 <= len(f.symbols) <= 25
            assert f.symbols <= set(default_params.pool)
            assert f.is_monotone

    def test_clause_count_roughly_uniform(self, default_params):
        rng = np.random.default_rng(1)
        counts = Counter(len(random_formula(default_params, rng).clauses) for _ in range(1200))
        assert sorted(counts) == list(range(10, 16))
        assert stats.chisquare([counts[k] for k in range(10, 16)]).pvalue > 1e-3

    def test_forced(self):
        p = GenParams(pool=("a", "b"), symbols_range=(2, 2), clauses_range=(1, 1), clause_cardinality=2)
        assert render_formula(random_formula(p, np.random.default_rng(5))) == "(a|b)"

    def test_deterministic(self, default_params):
        a = random_formula(default_params, np.random.default_rng(99))
        b = random_formula(default_params, np.random.default_rng(99))
        assert a == b

    def test_rejection_cap(self):
        p = GenParams(pool=tuple("abcdefghij"), symbols_range=(3, 3), clauses_range=(5, 5), clause_cardinality=3)
        with pytest.raises(GenerationError):
            random_formula(p, np.random.default_rng(0))


class TestRandomRenaming:
    def test_single_symbol(self):
        p = GenParams(pool=("a",), symbols_range=(1, 1), clauses_range=(1, 1), clause_cardinality=1)
        assert random_renaming(F("(a)"), p, np.random.default_rng(0)) == {"a": "a"}

    def test_all_bijections_observed(self):
        p = GenParams(pool=("a", "b", "c"), symbols_range=(3, 3), clauses_range=(1, 1), clause_cardinality=3)
        f = F("(a|b|c)")
        rng = np.random.default_rng(3)
        seen = Counter(tuple(sorted(random_renaming(f, p, rng).items())) for _ in range(1000))
        assert len(seen) == 6
        assert stats.chisquare(list(seen.values())).pvalue > 1e-3

    def test_injective(self, default_params):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            f = random_formula(default_params, rng)
            r = random_renaming(f, default_params, rng)
            assert set(r) == f.symbols
            assert len(set(r.values())) == len(r)


class TestPairs:
    def test_iso(self, default_params):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s = make_iso_pair(default_params, rng)
            assert s.category is Category.ISO and s.label == 1
            assert trivial_signature(s.alpha) == trivial_signature(s.beta)
            assert is_isomorphic(s.alpha, s.beta).isomorphic

    def test_iso_deterministic(self, default_params):
        assert make_iso_pair(default_params, np.random.default_rng(8)) == make_iso_pair(
            default_params, np.random.default_rng(8)
        )

    def test_add_clause_rule(self, default_params, rng):
        s = make_trivial_pair(default_params, rng, rule="add_clause")
        assert len(s.beta.clauses) == len(s.alpha.clauses) + 1

    def test_grow_clause_rule(self, default_params, rng):
        s = make_trivial_pair(default_params, rng, rule="grow_clause")
        a = Counter(trivial_signature(s.alpha).cardinality_multiset)
        b = Counter(trivial_signature(s.beta).cardinality_multiset)
        assert a - b == Counter({8: 1}) and b - a == Counter({9: 1})

    def test_fresh_symbol_falls_back_when_pool_exhausted(self):
        p = GenParams(pool=tuple("abcdefgh"), symbols_range=(8, 8), clauses_range=(2, 2), clause_cardinality=8)
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = make_trivial_pair(p, rng)
            assert detect_trivial_noniso(s.alpha, s.beta) is not None
        with pytest.raises(GenerationError):
            make_trivial_pair(p, rng, rule="add_fresh_symbol")

    def test_trivial_soundness(self, default_params):
        rng = np.random.default_rng(6)
        for _ in range(200):
            s = make_trivial_pair(default_params, rng)
            assert detect_trivial_noniso(s.alpha, s.beta) is not None
            assert not is_isomorphic(s.alpha, s.beta).isomorphic

    def test_nontrivial_soundness(self, default_params):
        rng = np.random.default_rng(7)
        for _ in range(200):
            s = make_nontrivial_pair(default_params, rng)
            assert trivial_signature(s.alpha) == trivial_signature(s.beta)
            assert detect_trivial_noniso(s.alpha, s.beta) is None
            assert not is_isomorphic(s.alpha, s.beta).isomorphic

    def test_nontrivial_impossible(self):
        p = GenParams(pool=("a", "b"), symbols_range=(2, 2), clauses_range=(1, 1), clause_cardinality=2)
        with pytest.raises(GenerationError):
            make_nontrivial_pair(p, np.random.default_rng(0))


class TestDatasets:
    def test_largest_remainder(self):
        fr = {Category.ISO: 0.5, Category.TRIVIAL: 0.25, Category.NONTRIVIAL: 0.25}
        assert list(largest_remainder(50000, fr).values()) == [25000, 12500, 12500]
        assert list(largest_remainder(10, fr).values()) == [5, 3, 2]
        assert list(largest_remainder(0, fr).values()) == [0, 0, 0]
        assert sum(largest_remainder(7, {Category.ISO: 1 / 3, Category.TRIVIAL: 1 / 3, Category.NONTRIVIAL: 1 / 3}).values()) == 7

    def test_empty_dataset(self, tmp_path):
        path = build_phase1_dataset(DatasetSpec(0), tmp_path / "empty.jsonl")
        assert path.read_bytes() == b""

    def test_counts_and_soundness(self, tmp_path):
        spec = DatasetSpec(40, params=GenParams(seed=7))
        path = build_phase1_dataset(spec, tmp_path / "d.jsonl")
        samples = read_jsonl(path)
        assert category_counts(samples) == {Category.ISO: 20, Category.TRIVIAL: 10, Category.NONTRIVIAL: 10}
        assert [s.id for s in samples] == list(range(40))
        for s in samples:
            assert classify_pair(s.alpha, s.beta) is s.category

    def test_byte_identical(self, tmp_path):
        spec = DatasetSpec(30, params=GenParams(seed=3))
        a = build_phase1_dataset(spec, tmp_path / "a.jsonl").read_bytes()
        b = build_phase1_dataset(spec, tmp_path / "b.jsonl").read_bytes()
        assert a == b
        other = build_phase1_dataset(DatasetSpec(30, params=GenParams(seed=4)), tmp_path / "c.jsonl").read_bytes()
        assert a != other

    def test_worker_count_independent(self, tmp_path):
        spec = DatasetSpec(24, params=GenParams(seed=5))
        a = build_phase1_dataset(spec, tmp_path / "a.jsonl", workers=1).read_bytes()
        b = build_phase1_dataset(spec, tmp_path / "b.jsonl", workers=3).read_bytes()
        assert hashlib.sha256(a).digest() == hashlib.sha256(b).digest()

    def test_sample_reproducible_from_its_seed(self):
        samples = generate_samples(DatasetSpec(12, params=GenParams(seed=9)))
        for s in samples:
            assert s.seed == sample_seed(9, s.id)
            assert make_sample(s.category, GenParams(seed=9), 9, s.id) == s

    def test_phase2_eval(self, tmp_path):
        path = build_phase2_eval_dataset(20, GenParams(seed=11), tmp_path / "p2.jsonl")
        samples = read_jsonl(path)
        counts = category_counts(samples)
        assert counts == {Category.ISO: 0, Category.TRIVIAL: 10, Category.NONTRIVIAL: 10}
        for s in samples:
            assert s.label == 0
            assert s.label2 == (1 if s.category is Category.NONTRIVIAL else 0)

    def test_phase2_eval_even_split(self):
        spec = DatasetSpec(10000, {Category.TRIVIAL: 0.5, Category.NONTRIVIAL: 0.5})
        assert spec.counts() == {Category.TRIVIAL: 5000, Category.NONTRIVIAL: 5000}
