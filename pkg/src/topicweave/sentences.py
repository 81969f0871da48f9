"""Term scoring against retrieved sentence pools: popularity and BM25 distinctiveness.

Each category's pool of topic-indicative sentences is treated as one BM25
pseudo-document; the collection is the set of all category pools. Natural
logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, Vocabulary
from .errors import ValidationError

# Softmax shift kicks in above this score to keep exp() in range.
_STABILIZE_ABOVE = 30.0


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def validate(self) -> None:
        if self.k1 <= 0:
            raise ValidationError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class SentencePool:
    """One category's sentence set with cached frequency statistics."""

    refs: tuple[tuple[int, int], ...]
    term_counts: dict[int, int] = field(repr=False)  # vocab term_id -> tf in pool
    token_length: int = 0                            # all tokens, in-vocab or not
    sentence_lengths: tuple[int, ...] = ()

    def tf(self, term_id: int) -> int:
        return self.term_counts.get(term_id, 0)


@dataclass(frozen=True)
class PoolCollection:
    """All category pools plus the collection-level BM25 statistics."""

    pools: tuple[SentencePool, ...]
    average_length: float
    pool_frequency: dict[int, int] = field(repr=False)  # term_id -> pools containing it

    def __len__(self) -> int:
        return len(self.pools)


def build_pool(corpus: Corpus, vocab: Vocabulary, refs: Sequence[tuple[int, int]]) -> SentencePool:
    counts: dict[int, int] = {}
    lengths = []
    ordered = tuple(sorted(set(refs)))
    for doc_id, sent_id in ordered:
        if doc_id < 0 or doc_id >= len(corpus) or sent_id < 0 or sent_id >= len(
            corpus.documents[doc_id]
        ):
            raise ValidationError(f"invalid sentence reference ({doc_id}, {sent_id})")
        tokens = corpus.documents[doc_id][sent_id]
        lengths.append(len(tokens))
        for token in tokens:
            term_id = vocab.term_to_id.get(token)
            if term_id is not None:
                counts[term_id] = counts.get(term_id, 0) + 1
    return SentencePool(
        refs=ordered,
        term_counts=counts,
        token_length=sum(lengths),
        sentence_lengths=tuple(lengths),
    )


def build_pools(
    corpus: Corpus, vocab: Vocabulary, refs_per_category: Sequence[Sequence[tuple[int, int]]]
) -> PoolCollection:
    pools = tuple(build_pool(corpus, vocab, refs) for refs in refs_per_category)
    total = sum(pool.token_length for pool in pools)
    frequency: dict[int, int] = {}
    for pool in pools:
        for term_id in pool.term_counts:
            frequency[term_id] = frequency.get(term_id, 0) + 1
    return PoolCollection(
        pools=pools,
        average_length=total / len(pools) if pools else 0.0,
        pool_frequency=frequency,
    )


def popularity(pools: PoolCollection, category: int, term_id: int) -> float:
    """log(1 + tf) of the term over the category's pool."""
    return math.log1p(pools.pools[category].tf(term_id))


def bm25(
    pools: PoolCollection, category: int, term_id: int, params: Bm25Params
) -> float:
    """Okapi BM25 of one term against one category pseudo-document.

    Uses the non-negative "plus one" IDF, log(1 + (N - n + 0.5) / (n + 0.5)),
    which stays positive even for a collection of only two pseudo-documents.
    """
    tf = pools.pools[category].tf(term_id)
    if tf == 0:
        return 0.0
    n_pools = len(pools)
    containing = pools.pool_frequency.get(term_id, 0)
    idf = math.log1p((n_pools - containing + 0.5) / (containing + 0.5))
    length = pools.pools[category].token_length
    norm = params.k1 * (1.0 - params.b + params.b * length / pools.average_length)
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


def _shift_for(scores: np.ndarray) -> float:
    peak = float(np.max(scores)) if len(scores) else 0.0
    return peak if peak > _STABILIZE_ABOVE else 0.0


def distinctiveness_from_scores(scores: np.ndarray, category: int) -> float:
    """exp(score against this pool) over one plus the sum over every pool.

    When the largest score exceeds the stabilization threshold, the maximum
    is subtracted before exponentiation and the constant one becomes
    exp(-max); the value is unchanged, only the arithmetic is.
    """
    scores = np.asarray(scores, dtype=np.float64)
    shift = _shift_for(scores)
    return float(
        math.exp(scores[category] - shift)
        / (math.exp(-shift) + np.exp(scores - shift).sum())
    )


def distinctiveness(
    pools: PoolCollection, category: int, term_id: int, params: Bm25Params
) -> float:
    """Softmax-style share of the term's BM25 relevance held by this category."""
    scores = np.array(
        [bm25(pools, j, term_id, params) for j in range(len(pools))], dtype=np.float64
    )
    return distinctiveness_from_scores(scores, category)


def blend(popularity_value: float, distinctiveness_value: float, alpha: float) -> float:
    """pop^alpha * dist^(1 - alpha); zero popularity always blends to zero."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    if popularity_value == 0.0:
        return 0.0
    return popularity_value**alpha * distinctiveness_value ** (1.0 - alpha)


def similarity(
    pools: PoolCollection,
    category: int,
    term_id: int,
    alpha: float,
    params: Bm25Params,
) -> float:
    """Popularity-distinctiveness blend of the term against one category."""
    pop = popularity(pools, category, term_id)
    if pop == 0.0:
        return blend(0.0, 0.0, alpha)
    return blend(pop, distinctiveness(pools, category, term_id, params), alpha)


def bm25_matrix(pools: PoolCollection, n_terms: int, params: Bm25Params) -> np.ndarray:
    """(n_categories, n_terms) BM25 scores; matches the scalar op exactly."""
    params.validate()
    n_pools = len(pools)
    tf = np.zeros((n_pools, n_terms), dtype=np.float64)
    for i, pool in enumerate(pools.pools):
        for term_id, count in pool.term_counts.items():
            tf[i, term_id] = count
    containing = np.zeros(n_terms, dtype=np.float64)
    for term_id, count in pools.pool_frequency.items():
        containing[term_id] = count
    idf = np.log1p((n_pools - containing + 0.5) / (containing + 0.5))
    if pools.average_length == 0.0:
        return np.zeros((n_pools, n_terms))
    lengths = np.array([pool.token_length for pool in pools.pools], dtype=np.float64)
    norm = params.k1 * (1.0 - params.b + params.b * lengths / pools.average_length)
    scores = idf[None, :] * tf * (params.k1 + 1.0) / (tf + norm[:, None])
    scores[tf == 0.0] = 0.0
    return scores


def similarity_matrix(
    pools: PoolCollection, n_terms: int, alpha: float, params: Bm25Params
) -> np.ndarray:
    """(n_categories, n_terms) sentence-context similarities."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    scores = bm25_matrix(pools, n_terms, params)
    peaks = scores.max(axis=0)
    shifts = np.where(peaks > _STABILIZE_ABOVE, peaks, 0.0)
    exp_scores = np.exp(scores - shifts[None, :])
    dist = exp_scores / (np.exp(-shifts) + exp_scores.sum(axis=0))[None, :]
    pop = np.zeros((len(pools), n_terms), dtype=np.float64)
    for i, pool in enumerate(pools.pools):
        for term_id, count in pool.term_counts.items():
            pop[i, term_id] = math.log1p(count)
    sim = np.where(pop > 0.0, pop**alpha * dist ** (1.0 - alpha), 0.0)
    return sim
