"""Popularity, BM25, distinctiveness, and the blended sentence similarity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicweave.corpus import build_vocabulary, parse_corpus
from topicweave.errors import ValidationError
from topicweave.sentences import (
    Bm25Params,
    blend,
    bm25,
    bm25_matrix,
    build_pool,
    build_pools,
    distinctiveness,
    distinctiveness_from_scores,
    popularity,
    similarity,
    similarity_matrix,
)

# Two categories, three sentences: category 0 pools the first two sentences
# of document 0, category 1 pools the single sentence of document 1.
FIXTURE_TEXT = "sushi rolls sushi . rolls fresh .\nsteak grill steak steak .\n"
POOL_REFS = [[(0, 0), (0, 1)], [(1, 0)]]


@pytest.fixture
def fixture():
    corpus = parse_corpus(FIXTURE_TEXT)
    vocab = build_vocabulary(corpus, 1)
    pools = build_pools(corpus, vocab, POOL_REFS)
    return corpus, vocab, pools


def reference_bm25(tf, pool_length, average_length, n_pools, n_containing, k1, b):
    """Literal Okapi BM25 with the non-negative plus-one IDF."""
    if tf == 0:
        return 0.0
    idf = math.log(1.0 + (n_pools - n_containing + 0.5) / (n_containing + 0.5))
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * pool_length / average_length))


class TestPools:
    def test_term_counts(self, fixture):
        corpus, vocab, pools = fixture
        pool0 = pools.pools[0]
        assert pool0.tf(vocab.id_of("sushi")) == 2
        assert pool0.tf(vocab.id_of("rolls")) == 2
        assert pool0.tf(vocab.id_of("steak")) == 0
        assert pool0.token_length == 5
        assert pools.pools[1].token_length == 4
        assert pools.average_length == 4.5

    def test_duplicate_refs_collapse(self, fixture):
        corpus, vocab, _ = fixture
        pool = build_pool(corpus, vocab, [(0, 0), (0, 0)])
        assert pool.tf(vocab.id_of("sushi")) == 2

    def test_invalid_ref(self, fixture):
        corpus, vocab, _ = fixture
        with pytest.raises(ValidationError, match="invalid sentence reference"):
            build_pool(corpus, vocab, [(5, 0)])

    def test_cache_matches_brute_force(self):
        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(30)]
        lines = []
        for _ in range(20):
            sents = [" ".join(rng.choice(words, size=rng.integers(2, 6))) + " ."
                     for _ in range(rng.integers(1, 4))]
            lines.append(" ".join(sents))
        corpus = parse_corpus("\n".join(lines) + "\n")
        vocab = build_vocabulary(corpus, 1)
        all_refs = [(d, s) for d, s, _ in corpus.sentences()]
        refs = [all_refs[i] for i in rng.choice(len(all_refs), size=10, replace=False)]
        pool = build_pool(corpus, vocab, refs)
        for _ in range(100):
            term = words[rng.integers(len(words))]
            if term not in vocab:
                continue
            brute = sum(
                sum(1 for tok in corpus.sentence(d, s) if tok == term)
                for d, s in set(refs)
            )
            assert pool.tf(vocab.id_of(term)) == brute


class TestPopularity:
    def test_zero_tf(self, fixture):
        _, vocab, pools = fixture
        assert popularity(pools, 0, vocab.id_of("steak")) == 0.0

    def test_tf_three(self, fixture):
        _, vocab, pools = fixture
        assert popularity(pools, 1, vocab.id_of("steak")) == pytest.approx(
            math.log(4.0), abs=1e-12
        )
        assert popularity(pools, 1, vocab.id_of("steak")) == pytest.approx(1.386294, abs=1e-6)

    def test_tf_adds_across_sentences(self, fixture):
        # "rolls" appears twice in one sentence region: once in each sentence
        _, vocab, pools = fixture
        assert pools.pools[0].tf(vocab.id_of("rolls")) == 2
        assert popularity(pools, 0, vocab.id_of("rolls")) == pytest.approx(math.log(3.0))

    def test_monotone_in_tf(self):
        values = [math.log1p(tf) for tf in range(10)]
        assert values == sorted(values)


class TestBm25:
    def test_absent_everywhere_scores_zero(self, fixture):
        _, vocab, pools = fixture
        assert bm25(pools, 0, vocab.id_of("steak"), Bm25Params()) == 0.0
        assert bm25(pools, 0, vocab.id_of("grill"), Bm25Params()) == 0.0

    def test_matches_reference_to_1e9(self, fixture):
        _, vocab, pools = fixture
        params = Bm25Params()
        lengths = [5, 4]
        df = {"sushi": 1, "rolls": 1, "fresh": 1, "steak": 1, "grill": 1}
        tf = {("sushi", 0): 2, ("rolls", 0): 2, ("fresh", 0): 1,
              ("steak", 1): 3, ("grill", 1): 1}
        for term in df:
            for category in (0, 1):
                expected = reference_bm25(
                    tf.get((term, category), 0), lengths[category], 4.5,
                    2, df[term], params.k1, params.b,
                )
                actual = bm25(pools, category, vocab.id_of(term), params)
                assert actual == pytest.approx(expected, abs=1e-9), (term, category)

    def test_idf_when_present_everywhere(self):
        corpus = parse_corpus("shared one .\nshared two .\n")
        vocab = build_vocabulary(corpus, 1)
        pools = build_pools(corpus, vocab, [[(0, 0)], [(1, 0)]])
        params = Bm25Params()
        expected_idf = math.log(1.0 + 0.5 / 2.5)
        score = bm25(pools, 0, vocab.id_of("shared"), params)
        tf = 1
        norm = params.k1 * (1 - params.b + params.b * 2 / 2.0)
        assert score == pytest.approx(expected_idf * tf * (params.k1 + 1) / (tf + norm), abs=1e-12)

    def test_b_zero_ignores_length(self):
        corpus = parse_corpus("word .\nword word word word word .\n")
        vocab = build_vocabulary(corpus, 1)
        pools = build_pools(corpus, vocab, [[(0, 0)], [(1, 0)]])
        params = Bm25Params(k1=1.2, b=0.0)
        short = bm25(pools, 0, vocab.id_of("word"), params)
        # same tf in a pool of very different length
        corpus2 = parse_corpus("word pad pad pad pad pad pad pad .\nword .\n")
        vocab2 = build_vocabulary(corpus2, 1)
        pools2 = build_pools(corpus2, vocab2, [[(0, 0)], [(1, 0)]])
        long = bm25(pools2, 0, vocab2.id_of("word"), params)
        assert short == pytest.approx(long, abs=1e-12)

    def test_params_validation(self):
        with pytest.raises(ValidationError):
            Bm25Params(k1=0.0).validate()
        with pytest.raises(ValidationError):
            Bm25Params(b=1.5).validate()

    def test_matrix_matches_scalar(self, fixture):
        _, vocab, pools = fixture
        params = Bm25Params()
        matrix = bm25_matrix(pools, len(vocab), params)
        for category in range(2):
            for term_id in range(len(vocab)):
                assert matrix[category, term_id] == pytest.approx(
                    bm25(pools, category, term_id, params), abs=1e-12
                )


class TestDistinctiveness:
    def test_all_zero_scores(self, fixture):
        _, vocab, pools = fixture
        # "missing" has zero BM25 against both pools
        value = distinctiveness_from_scores(np.zeros(2), 0)
        assert value == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_two_zero_example(self):
        value = distinctiveness_from_scores(np.array([2.0, 0.0]), 0)
        assert value == pytest.approx(math.exp(2) / (1 + math.exp(2) + 1), abs=1e-12)
        assert value == pytest.approx(0.786986, abs=1e-6)

    def test_softmax_limit(self):
        value = distinctiveness_from_scores(np.array([700.0, 1.0]), 0)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_stabilized_equals_direct_formula(self):
        # above the shift threshold the stabilized path must agree with the
        # plain formula evaluated in higher headroom
        scores = np.array([35.0, 31.0, 12.0])
        value = distinctiveness_from_scores(scores, 0)
        direct = math.exp(35.0) / (1.0 + sum(math.exp(s) for s in scores))
        assert value == pytest.approx(direct, rel=1e-12)

    def test_sum_under_one_on_fixture(self, fixture):
        _, vocab, pools = fixture
        params = Bm25Params()
        for term_id in range(len(vocab)):
            total = sum(distinctiveness(pools, c, term_id, params) for c in range(2))
            assert total < 1.0

    @given(
        scores=st.lists(st.floats(min_value=0.0, max_value=12.0), min_size=1, max_size=6)
    )
    @settings(max_examples=100)
    def test_sum_under_one_property(self, scores):
        # 12 comfortably bounds reachable scores: the plus-one IDF caps BM25
        # at idf * (k1 + 1), which stays below 12 for any workable category
        # count; beyond ~36 the constant one underflows and the sum
        # saturates at exactly 1.0 in float64.
        arr = np.array(scores)
        total = sum(distinctiveness_from_scores(arr, c) for c in range(len(arr)))
        assert total < 1.0

    def test_huge_scores_saturate_at_one(self):
        total = sum(distinctiveness_from_scores(np.array([37.0]), c) for c in range(1))
        assert total <= 1.0


class TestBlend:
    def test_zero_popularity_is_zero(self):
        assert blend(0.0, 0.9, 0.2) == 0.0

    def test_unit_popularity_is_pure_distinctiveness(self):
        for dist in (0.1, 0.5, 0.9):
            assert blend(1.0, dist, 0.2) == pytest.approx(dist**0.8, abs=1e-12)

    def test_reference_point(self):
        # pop = ln 4, dist = 1/3, alpha = 0.2; value frozen from an
        # independent high-precision evaluation of (ln 4)^0.2 * (1/3)^0.8
        assert blend(math.log(4.0), 1.0 / 3.0, 0.2) == pytest.approx(0.443276, abs=1e-6)
        assert blend(math.log(4.0), 1.0 / 3.0, 0.2) == pytest.approx(
            0.44327586664791196, abs=1e-12
        )

    def test_alpha_validation(self):
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValidationError):
                blend(1.0, 0.5, alpha)

    @given(
        pop=st.floats(min_value=0.0, max_value=10.0),
        dist_low=st.floats(min_value=0.001, max_value=0.999),
        bump=st.floats(min_value=0.0, max_value=0.5),
        alpha=st.floats(min_value=0.01, max_value=0.99),
    )
    @settings(max_examples=100)
    def test_monotone_in_both_factors(self, pop, dist_low, bump, alpha):
        dist_high = min(dist_low + bump, 1.0)
        assert blend(pop, dist_high, alpha) >= blend(pop, dist_low, alpha)
        assert blend(pop + bump, dist_low, alpha) >= blend(pop, dist_low, alpha)


class TestSentenceSimilarity:
    def test_zero_tf_is_zero(self, fixture):
        _, vocab, pools = fixture
        value = similarity(pools, 0, vocab.id_of("steak"), 0.2, Bm25Params())
        assert value == 0.0

    def test_composition(self, fixture):
        _, vocab, pools = fixture
        params = Bm25Params()
        tid = vocab.id_of("sushi")
        expected = blend(
            popularity(pools, 0, tid), distinctiveness(pools, 0, tid, params), 0.2
        )
        assert similarity(pools, 0, tid, 0.2, params) == pytest.approx(expected, abs=1e-12)

    def test_matrix_matches_scalar(self, fixture):
        _, vocab, pools = fixture
        params = Bm25Params()
        matrix = similarity_matrix(pools, len(vocab), 0.2, params)
        for category in range(2):
            for term_id in range(len(vocab)):
                assert matrix[category, term_id] == pytest.approx(
                    similarity(pools, category, term_id, 0.2, params), abs=1e-12
                )
