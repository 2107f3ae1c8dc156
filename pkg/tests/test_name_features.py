import random

import pytest

from smutf.embedding import HashedNgramProvider
from smutf.name_features import (
    bleu_score,
    damerau_levenshtein,
    edit_similarity,
    lcs_length,
    lcs_ratio,
    name_features,
    one_in_one,
    tokenize_name,
)

from .oracles import all_strings, bfs_edit_distances, lcs_by_enumeration


class TestTokenizer:
    @pytest.mark.parametrize(
        "name,tokens",
        [
            ("rating_star", ["rating", "star"]),
            ("originalTitle", ["original", "title"]),
            ("", []),
            ("ISO-3", ["iso", "3"]),
            ("col3", ["col3"]),
            ("First Name", ["first", "name"]),
            ("HTTPStatus", ["httpstatus"]),  # only lower->upper bumps split
            ("a_bC", ["a", "b", "c"]),
        ],
    )
    def test_cases(self, name, tokens):
        assert tokenize_name(name) == tokens


class TestBleu:
    def test_identity_is_one(self):
        for name in ("x", "rating_star", "a b c d e f"):
            assert bleu_score(name, name) == pytest.approx(1.0, abs=1e-12)

    def test_shared_token_positive(self):
        # hand computation: one of two unigrams matches (1/2); smoothed
        # bigram precision (0+1)/(1+1); geometric mean sqrt(1/4) = 1/2.
        assert bleu_score("rating_star", "review_star") == pytest.approx(0.5, abs=1e-12)

    def test_empty_side_is_zero(self):
        assert bleu_score("abc", "") == 0.0
        assert bleu_score("", "") == 0.0

    def test_symmetry(self):
        rng = random.Random(1)
        vocab = ["alpha", "beta", "gamma", "delta"]
        for _ in range(50):
            a = "_".join(rng.choices(vocab, k=rng.randrange(1, 5)))
            b = "_".join(rng.choices(vocab, k=rng.randrange(1, 5)))
            assert bleu_score(a, b) == pytest.approx(bleu_score(b, a), abs=1e-15)

    def test_bounds(self):
        rng = random.Random(2)
        vocab = ["aa", "bb", "cc"]
        for _ in range(100):
            a = " ".join(rng.choices(vocab, k=rng.randrange(0, 5)))
            b = " ".join(rng.choices(vocab, k=rng.randrange(0, 5)))
            assert 0.0 <= bleu_score(a, b) <= 1.0 + 1e-12


class TestEditDistance:
    def test_single_transposition(self):
        assert damerau_levenshtein("ab", "ba") == 1
        assert edit_similarity("ab", "ba") == pytest.approx(0.5)

    def test_kitten_sitting(self):
        assert damerau_levenshtein("kitten", "sitting") == 3
        assert edit_similarity("kitten", "sitting") == pytest.approx(1 - 3 / 7)

    def test_identity(self):
        assert edit_similarity("schema", "schema") == 1.0

    def test_both_empty(self):
        assert edit_similarity("", "") == 1.0

    def test_case_folding(self):
        assert edit_similarity("Title", "title") == 1.0

    def test_transposition_then_insert(self):
        # a true-metric case: swap then insert beats three sequential edits
        assert damerau_levenshtein("ca", "abc") == 2

    def test_against_bfs_oracle_short(self):
        # full oracle sweep lives in the acceptance suite; spot-check here
        alphabet = "abc"
        strings = all_strings(alphabet, 3)
        for src in strings:
            dist = bfs_edit_distances(src, alphabet, max_len=5)
            for dst in strings:
                assert damerau_levenshtein(src, dst) == dist[dst], (src, dst)


class TestLcs:
    def test_identity(self):
        assert lcs_ratio("abc", "abc") == 1.0

    def test_example(self):
        assert lcs_ratio("abc", "axc") == pytest.approx(2 / 3)

    def test_empty(self):
        assert lcs_ratio("abc", "") == 0.0
        assert lcs_ratio("", "") == 0.0

    def test_against_enumeration_oracle(self):
        rng = random.Random(3)
        for _ in range(200):
            a = "".join(rng.choices("abc", k=rng.randrange(0, 6)))
            b = "".join(rng.choices("abc", k=rng.randrange(0, 6)))
            assert lcs_length(a, b) == lcs_by_enumeration(a, b), (a, b)


class TestOneInOne:
    def test_containment(self):
        assert one_in_one("title", "originalTitle") == 1
        assert one_in_one("rating", "review") == 0
        assert one_in_one("x", "x") == 1

    def test_empty_rules(self):
        assert one_in_one("", "") == 1
        assert one_in_one("", "abc") == 0


@pytest.fixture(scope="module")
def provider():
    return HashedNgramProvider(dim=256)


class TestNameFeatureVector:
    def test_identity_vector(self, provider):
        v = name_features(provider, "price", "price")
        assert v.as_array() == pytest.approx([1, 1, 1, 1, 1], abs=1e-9)

    def test_fixed_order_and_symmetry(self, provider):
        v1 = name_features(provider, "col3", "price").as_array()
        v2 = name_features(provider, "price", "col3").as_array()
        assert list(v1) == list(v2)
        assert v1[4] == 0  # one_in_one
        assert v1[3] == pytest.approx(lcs_by_enumeration("col3", "price") / 5)

    def test_component_ranges(self, provider):
        rng = random.Random(7)
        names = ["alpha", "BetaGamma", "col9", "", "user_id", "PRICE usd"]
        for _ in range(30):
            a, b = rng.choice(names), rng.choice(names)
            v = name_features(provider, a, b)
            assert -1 - 1e-12 <= v.cos_name <= 1 + 1e-12
            for x in (v.bleu, v.edit_sim, v.lcs_ratio):
                assert 0 <= x <= 1 + 1e-12
            assert v.one_in_one in (0, 1)
