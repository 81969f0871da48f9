"""Iterative seed-guided topic mining.

Each iteration retrains the joint embedding with the current per-category
term sets, re-ranks the vocabulary by embedding and encoder similarity to
pick provisional term sets, retrieves category-pure anchor sentences plus
their admissible neighbors, and fuses three ranking lists (combined score,
embedding-only, encoder-only) by mean reciprocal rank to decide which terms
survive into the next iteration.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Collection, Sequence

import numpy as np

from .corpus import Corpus, SeedSet, Vocabulary
from .embedding import EmbeddingSpace, TrainConfig, train_embeddings
from .errors import ValidationError
from .mentions import TermRepresentation
from .sentences import Bm25Params, PoolCollection, build_pools, similarity_matrix

logger = logging.getLogger(__name__)

SentenceRef = tuple[int, int]


@dataclass
class PipelineConfig:
    iterations: int = 4
    tau: int = 20
    anchor_limit: int = 500
    neighbor_window: int = 4
    rho: int = 20
    eta: float = 0.1
    alpha: float = 0.2
    exclusive: bool = True
    use_embedding: bool = True
    use_plm: bool = True
    use_sentences: bool = True
    workers: int = 1

    def validate(self) -> None:
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        for name in ("tau", "anchor_limit", "neighbor_window", "rho", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError(f"eta must be in (0, 1], got {self.eta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        disabled = (not self.use_embedding) + (not self.use_plm) + (not self.use_sentences)
        if disabled > 1:
            raise ValidationError("at most one context signal can be disabled")


@dataclass(frozen=True)
class RankBundle:
    """One candidate term's scores, 1-based ranks, and fused MRR.

    A rank of 0 marks a ranking list that was disabled by configuration;
    disabled lists never enter the MRR average.
    """

    term: str
    score_all: float
    score_emb: float
    score_plm: float
    rank_all: int
    rank_emb: int
    rank_plm: int
    mrr: float


@dataclass(frozen=True)
class IterationSnapshot:
    """State recorded at the end of one iteration.

    ``ranked_topics`` are the tau-selected term sets that drove sentence
    retrieval and ensemble scoring within the iteration; ``topics`` are the
    sets that survived the MRR threshold and feed the next iteration.
    """

    iteration: int
    ranked_topics: tuple[tuple[str, ...], ...]
    topics: tuple[tuple[str, ...], ...]
    anchors: tuple[tuple[SentenceRef, ...], ...]
    neighbors: tuple[tuple[SentenceRef, ...], ...]
    bundles: tuple[tuple[RankBundle, ...], ...]


@dataclass(frozen=True)
class PipelineResult:
    seeds: tuple[str, ...]
    topics: tuple[tuple[RankBundle, ...], ...]
    snapshots: tuple[IterationSnapshot, ...]

    def topic_terms(self) -> dict[str, list[str]]:
        return {
            seed: [b.term for b in bundles]
            for seed, bundles in zip(self.seeds, self.topics)
        }


def reciprocal_rank(rank: int, rho: int) -> float:
    """1/rank within the top rho, zero beyond it."""
    if rank < 1:
        raise ValidationError("ranks are 1-based")
    return 1.0 / rank if rank <= rho else 0.0


def mrr_from_ranks(ranks: Sequence[int], rho: int) -> float:
    if not ranks:
        raise ValidationError("at least one rank is required")
    return sum(reciprocal_rank(r, rho) for r in ranks) / len(ranks)


def count_indicative(sentence: Sequence[str], terms: Collection[str]) -> int:
    """Total occurrences in the sentence of any term from the set."""
    term_set = set(terms)
    return sum(1 for token in sentence if token in term_set)


def sentence_category_counts(
    corpus: Corpus, topic_terms: Sequence[Collection[str]]
) -> dict[SentenceRef, tuple[int, ...]]:
    """Indicative-term counts of every sentence against every category."""
    membership: dict[str, list[int]] = {}
    for i, terms in enumerate(topic_terms):
        for term in terms:
            membership.setdefault(term, []).append(i)
    n = len(topic_terms)
    counts: dict[SentenceRef, tuple[int, ...]] = {}
    for doc_id, sent_id, tokens in corpus.sentences():
        row = [0] * n
        for token in tokens:
            for i in membership.get(token, ()):
                row[i] += 1
        counts[(doc_id, sent_id)] = tuple(row)
    return counts


def retrieve_anchors(
    corpus: Corpus,
    topic_terms: Sequence[Collection[str]],
    category: int,
    limit: int,
    counts: dict[SentenceRef, tuple[int, ...]] | None = None,
) -> list[SentenceRef]:
    """Sentences containing this category's terms and no other category's.

    Sorted by indicative count descending, ties by (doc_id, sent_id)
    ascending, truncated to ``limit``. Sentences with a zero count for the
    category are never anchors.
    """
    if counts is None:
        counts = sentence_category_counts(corpus, topic_terms)
    eligible = []
    for (doc_id, sent_id), row in counts.items():
        if row[category] < 1:
            continue
        if any(c != 0 for j, c in enumerate(row) if j != category):
            continue
        eligible.append((-row[category], doc_id, sent_id))
    eligible.sort()
    return [(doc_id, sent_id) for _, doc_id, sent_id in eligible[:limit]]


def expand_neighbors(
    corpus: Corpus,
    anchors: Sequence[SentenceRef],
    topic_terms: Sequence[Collection[str]],
    category: int,
    window: int,
    counts: dict[SentenceRef, tuple[int, ...]] | None = None,
) -> list[SentenceRef]:
    """Admit sentences around each anchor until one diverges.

    Scans +1..+window then -1..-window inside the anchor's document. A
    sentence with any other category's term (or the document edge) stops
    that direction; admitted sentences may freely mention this category.
    """
    if counts is None:
        counts = sentence_category_counts(corpus, topic_terms)
    found: set[SentenceRef] = set()
    for doc_id, sent_id in anchors:
        n_sents = len(corpus.documents[doc_id])
        for step in (1, -1):
            for k in range(1, window + 1):
                probe = sent_id + step * k
                if probe < 0 or probe >= n_sents:
                    break
                row = counts[(doc_id, probe)]
                if any(c != 0 for j, c in enumerate(row) if j != category):
                    break
                found.add((doc_id, probe))
    return sorted(found)


def _candidate_ids(vocab: Vocabulary, seeds: SeedSet, category: int) -> np.ndarray:
    excluded = {
        vocab.term_to_id[s]
        for j, s in enumerate(seeds.seeds)
        if j != category and s in vocab.term_to_id
    }
    return np.array(
        [i for i in range(len(vocab)) if i not in excluded], dtype=np.int64
    )


def _topic_ids(vocab: Vocabulary, topic_terms: Sequence[str]) -> list[int]:
    ids = []
    for term in topic_terms:
        if term not in vocab:
            raise ValidationError(f"topic term not in vocabulary: {term!r}")
        ids.append(vocab.id_of(term))
    return ids


def embedding_sum_scores(
    space: EmbeddingSpace, vocab: Vocabulary, topic_terms: Sequence[str]
) -> np.ndarray:
    """Sum over the topic set of cosine similarity, for every vocabulary term."""
    ids = _topic_ids(vocab, topic_terms)
    matrix = space.center_vectors
    norms = np.maximum(np.linalg.norm(matrix, axis=1, keepdims=True), 1e-12)
    units = matrix / norms
    return units @ units[ids].sum(axis=0)


def plm_sum_scores(
    reps: TermRepresentation, vocab: Vocabulary, topic_terms: Sequence[str]
) -> np.ndarray:
    """Sum over the topic set of encoder-representation cosine similarity.

    Terms without a representation score zero everywhere.
    """
    ids = _topic_ids(vocab, topic_terms)
    return reps.unit_vectors @ reps.unit_vectors[ids].sum(axis=0)


def _rank_positions(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """1-based positions under score-descending, label-ascending order."""
    order = np.lexsort((labels, -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def initial_rank(
    vocab: Vocabulary,
    space: EmbeddingSpace | None,
    reps: TermRepresentation,
    topic_terms: Sequence[str],
    category: int,
    seeds: SeedSet,
    config: PipelineConfig,
) -> list[str]:
    """Top tau terms by the product of summed embedding and encoder similarity.

    Candidates are the whole vocabulary except the other categories' seeds.
    Ties break lexicographically.
    """
    if not topic_terms:
        raise ValidationError("topic term set must be non-empty")
    candidates = _candidate_ids(vocab, seeds, category)
    labels = np.array([vocab.terms[i] for i in candidates])
    score = np.ones(len(candidates), dtype=np.float64)
    if config.use_embedding:
        if space is None:
            raise ValidationError("embedding signal enabled but no trained space given")
        score = score * embedding_sum_scores(space, vocab, topic_terms)[candidates]
    if config.use_plm:
        score = score * plm_sum_scores(reps, vocab, topic_terms)[candidates]
    order = np.lexsort((labels, -score))
    keep = order[: config.tau]
    return [str(labels[j]) for j in keep]


def ensemble_rank(
    vocab: Vocabulary,
    space: EmbeddingSpace | None,
    reps: TermRepresentation,
    pools: PoolCollection | None,
    topic_terms: Sequence[str],
    category: int,
    seeds: SeedSet,
    config: PipelineConfig,
    bm25_params: Bm25Params,
) -> list[RankBundle]:
    """Rank candidates on the combined and single-signal lists, fuse by MRR.

    Returns bundles for every term appearing in the top rho of at least one
    active list, sorted by MRR descending then term.
    """
    candidates = _candidate_ids(vocab, seeds, category)
    labels = np.array([vocab.terms[i] for i in candidates])
    emb = plm = sntn = None
    if config.use_embedding:
        if space is None:
            raise ValidationError("embedding signal enabled but no trained space given")
        emb = embedding_sum_scores(space, vocab, topic_terms)[candidates]
    if config.use_plm:
        plm = plm_sum_scores(reps, vocab, topic_terms)[candidates]
    if config.use_sentences:
        if pools is None:
            raise ValidationError("sentence signal enabled but no pools given")
        sntn = similarity_matrix(pools, len(vocab), config.alpha, bm25_params)[category][
            candidates
        ]
    score_all = np.ones(len(candidates), dtype=np.float64)
    for part in (emb, plm, sntn):
        if part is not None:
            score_all = score_all * part

    rank_all = _rank_positions(score_all, labels)
    rank_emb = _rank_positions(emb, labels) if emb is not None else None
    rank_plm = _rank_positions(plm, labels) if plm is not None else None
    active = [rank_all] + [r for r in (rank_emb, rank_plm) if r is not None]

    keep: set[int] = set()
    for ranks in active:
        keep.update(np.flatnonzero(ranks <= config.rho).tolist())
    bundles = []
    for idx in keep:
        ranks_here = [int(ranks[idx]) for ranks in active]
        bundles.append(
            RankBundle(
                term=str(labels[idx]),
                score_all=float(score_all[idx]),
                score_emb=float(emb[idx]) if emb is not None else 0.0,
                score_plm=float(plm[idx]) if plm is not None else 0.0,
                rank_all=int(rank_all[idx]),
                rank_emb=int(rank_emb[idx]) if rank_emb is not None else 0,
                rank_plm=int(rank_plm[idx]) if rank_plm is not None else 0,
                mrr=mrr_from_ranks(ranks_here, config.rho),
            )
        )
    bundles.sort(key=lambda b: (-b.mrr, b.term))
    return bundles


def update_terms(
    bundles_per_category: Sequence[Sequence[RankBundle]],
    seeds: SeedSet,
    eta: float,
    exclusive: bool,
) -> list[list[str]]:
    """Keep terms whose MRR reaches eta; optionally make membership exclusive.

    Under exclusive assignment a term qualifying for several categories stays
    only where its MRR is highest (ties go to the lowest category index).
    Every category always retains its own seed. Term order is MRR
    descending, ties lexicographic.
    """
    qualified: list[dict[str, RankBundle]] = [
        {b.term: b for b in bundles if b.mrr >= eta} for bundles in bundles_per_category
    ]
    if exclusive:
        best: dict[str, tuple[float, int]] = {}
        for i, bucket in enumerate(qualified):
            for term, bundle in bucket.items():
                current = best.get(term)
                if current is None or bundle.mrr > current[0]:
                    best[term] = (bundle.mrr, i)
        for i, bucket in enumerate(qualified):
            for term in [t for t in bucket if best[t][1] != i]:
                del bucket[term]
    topics = []
    for i, bucket in enumerate(qualified):
        seed = seeds.seeds[i]
        mrr_of = {term: bundle.mrr for term, bundle in bucket.items()}
        if seed not in mrr_of:
            seed_bundle = next(
                (b for b in bundles_per_category[i] if b.term == seed), None
            )
            mrr_of[seed] = seed_bundle.mrr if seed_bundle else 0.0
        ordered = sorted(mrr_of, key=lambda term: (-mrr_of[term], term))
        if len(ordered) == 1:
            logger.warning("category %r kept no terms beyond its seed", seed)
        topics.append(ordered)
    return topics


def _map_categories(fn: Callable[[int], object], n: int, workers: int) -> list:
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=min(workers, n)) as pool:
        return list(pool.map(fn, range(n)))


def run(
    corpus: Corpus,
    vocab: Vocabulary,
    seeds: SeedSet,
    reps: TermRepresentation,
    train_config: TrainConfig,
    config: PipelineConfig,
    bm25_params: Bm25Params,
    initial_topics: Sequence[Sequence[str]] | None = None,
    first_iteration: int = 1,
) -> PipelineResult:
    """Run the full iterative loop and return seed-free ranked topics.

    ``initial_topics``/``first_iteration`` resume from a checkpointed state;
    iteration k always retrains the embedding with the base rng seed offset
    by k, so a resumed run reproduces the uninterrupted one exactly.
    """
    config.validate()
    bm25_params.validate()
    train_config.validate()
    missing = [s for s in seeds if s not in vocab]
    if missing:
        raise ValidationError(f"seed not in vocabulary: {', '.join(missing)}")
    if config.use_plm:
        without = [s for s in seeds if not reps.has(vocab.id_of(s))]
        if without:
            raise ValidationError(f"seed without mentions: {', '.join(without)}")
    if not 1 <= first_iteration <= config.iterations:
        raise ValidationError(
            f"first_iteration must be in [1, {config.iterations}], got {first_iteration}"
        )

    unrepresented = int(np.count_nonzero(reps.mention_counts == 0))
    if unrepresented:
        logger.info(
            "%d vocabulary terms have no encoder representation; "
            "their encoder similarity is zero",
            unrepresented,
        )

    n_cats = len(seeds)
    topics: list[list[str]] = (
        [list(t) for t in initial_topics]
        if initial_topics is not None
        else [[s] for s in seeds]
    )
    if len(topics) != n_cats:
        raise ValidationError(f"expected {n_cats} topic sets, got {len(topics)}")
    for terms in topics:
        _topic_ids(vocab, terms)

    snapshots: list[IterationSnapshot] = []
    for iteration in range(first_iteration, config.iterations + 1):
        space: EmbeddingSpace | None = None
        if config.use_embedding:
            iter_config = replace(
                train_config, rng_seed=train_config.rng_seed + iteration
            )
            space = train_embeddings(corpus, vocab, seeds, topics, iter_config)
        topics = _map_categories(
            lambda i: initial_rank(vocab, space, reps, topics[i], i, seeds, config),
            n_cats,
            config.workers,
        )
        ranked_topics = tuple(tuple(t) for t in topics)

        if config.use_sentences:
            counts = sentence_category_counts(corpus, topics)
            anchors = _map_categories(
                lambda i: retrieve_anchors(
                    corpus, topics, i, config.anchor_limit, counts=counts
                ),
                n_cats,
                config.workers,
            )
            neighbors = _map_categories(
                lambda i: expand_neighbors(
                    corpus, anchors[i], topics, i, config.neighbor_window, counts=counts
                ),
                n_cats,
                config.workers,
            )
            pools = build_pools(
                corpus,
                vocab,
                [list(anchors[i]) + list(neighbors[i]) for i in range(n_cats)],
            )
        else:
            anchors = [[] for _ in range(n_cats)]
            neighbors = [[] for _ in range(n_cats)]
            pools = None

        bundles = _map_categories(
            lambda i: ensemble_rank(
                vocab, space, reps, pools, topics[i], i, seeds, config, bm25_params
            ),
            n_cats,
            config.workers,
        )
        topics = update_terms(bundles, seeds, config.eta, config.exclusive)

        bundle_maps = [{b.term: b for b in bundles[i]} for i in range(n_cats)]
        snapshots.append(
            IterationSnapshot(
                iteration=iteration,
                ranked_topics=ranked_topics,
                topics=tuple(tuple(t) for t in topics),
                anchors=tuple(tuple(a) for a in anchors),
                neighbors=tuple(tuple(x) for x in neighbors),
                bundles=tuple(
                    tuple(
                        bundle_maps[i][term]
                        for term in topics[i]
                        if term in bundle_maps[i]
                    )
                    for i in range(n_cats)
                ),
            )
        )
        logger.info(
            "iteration %d/%d: topic sizes %s",
            iteration,
            config.iterations,
            [len(t) for t in topics],
        )

    final = []
    for i, seed in enumerate(seeds.seeds):
        bundle_map = {b.term: b for b in snapshots[-1].bundles[i]}
        final.append(
            tuple(bundle_map[t] for t in topics[i] if t != seed and t in bundle_map)
        )
    return PipelineResult(
        seeds=tuple(seeds.seeds),
        topics=tuple(final),
        snapshots=tuple(snapshots),
    )
