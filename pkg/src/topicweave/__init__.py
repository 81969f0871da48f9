"""Seed-guided topic term discovery from three complementary context signals."""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    SeedSet,
    Vocabulary,
    build_vocabulary,
    corpus_checksum,
    load_corpus,
    load_seeds,
    parse_corpus,
    serialize_corpus,
    skipgram_pairs,
    split_corpus,
)
from .embedding import (
    EmbeddingSpace,
    TrainConfig,
    load_embeddings,
    objective_terms,
    save_embeddings,
    train_embeddings,
)
from .errors import ValidationError
from .evaluation import GoldLabels, load_gold, ndcg_at_k, npmi, precision_at_k
from .mentions import (
    MentionStore,
    TermRepresentation,
    build_representations,
    load_mentions,
    term_representation,
    write_mentions,
)
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    RankBundle,
    count_indicative,
    ensemble_rank,
    expand_neighbors,
    initial_rank,
    retrieve_anchors,
    run,
    update_terms,
)
from .sentences import Bm25Params, bm25, build_pools, distinctiveness, popularity

__all__ = [name for name in dir() if not name.startswith("_")]
