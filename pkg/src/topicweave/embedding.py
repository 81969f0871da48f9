"""Joint spherical embedding of terms, documents, and categories.

Every term w carries a center vector u_w, a context vector v_w, and a
concentration scalar kappa_w >= 0; documents and categories carry context
vectors of their own. Training maximizes, by negative-sampling SGD, the
log-likelihood of observing three kinds of contexts around each term:

* skip-gram: the terms within the window around each occurrence,
* document: the document each occurrence belongs to,
* category: the category whose current term set contains the term.

A positive pair (w, z) contributes ``log sigmoid(kappa_w * cos(u_w, v_z))``
plus, for each sampled negative z', ``log sigmoid(-kappa_w * cos(u_w, v_z'))``.
Skip-gram negatives are drawn from the unigram distribution raised to 0.75;
document and category negatives are drawn uniformly from the other members
of their family. After every mini-batch the updated vectors are projected
back onto the unit sphere and kappa is clamped to [0, kappa_max], so the
norm constraints hold exactly at every epoch boundary.

Single-threaded training with a fixed rng_seed is bit-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, SeedSet, Vocabulary, skipgram_pairs
from .errors import ValidationError

_MAGIC = b"TWEB"
_FORMAT_VERSION = 1
_NOISE_POWER = 0.75
_NORM_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """Trainer hyperparameters; the learning rate decays linearly per epoch."""

    dimension: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    final_learning_rate: float = 0.005
    kappa_max: float = 50.0
    rng_seed: int = 1
    batch_size: int = 1024

    def validate(self) -> None:
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.negatives < 0:
            raise ValidationError("negatives must be >= 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate < 0 or self.final_learning_rate < 0:
            raise ValidationError("learning rates must be >= 0")
        if self.kappa_max <= 0:
            raise ValidationError("kappa_max must be > 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    """Per-epoch objective sums, sample counts, and constraint diagnostics.

    ``max_norm_error`` is the largest deviation from unit norm over all four
    vector families, measured right after the epoch finished; ``kappa_min``
    and ``kappa_max`` bound the concentration values at the same moment.
    """

    skipgram_ll: float
    document_ll: float
    category_ll: float
    positives: int
    sample_terms: int
    max_norm_error: float
    kappa_min: float
    kappa_max: float

    @property
    def total_ll(self) -> float:
        return self.skipgram_ll + self.document_ll + self.category_ll

    @property
    def mean_objective(self) -> float:
        return self.total_ll / max(self.sample_terms, 1)


@dataclass
class EmbeddingSpace:
    """Trained vectors; all rows unit-norm, kappa in [0, kappa_max]."""

    terms: tuple[str, ...]
    term_to_id: dict[str, int] = field(repr=False)
    center_vectors: np.ndarray = field(repr=False)    # (n_terms, p)
    context_vectors: np.ndarray = field(repr=False)   # (n_terms, p)
    doc_vectors: np.ndarray = field(repr=False)       # (n_docs, p)
    category_vectors: np.ndarray = field(repr=False)  # (n_cats, p)
    kappa: np.ndarray = field(repr=False)             # (n_terms,)
    history: tuple[EpochStats, ...] = ()

    @property
    def dimension(self) -> int:
        return self.center_vectors.shape[1]

    def id_of(self, term: str) -> int:
        try:
            return self.term_to_id[term]
        except KeyError:
            raise ValidationError(f"term not embedded: {term!r}") from None


def similarity(space: EmbeddingSpace, a: str | int, b: str | int) -> float:
    """Cosine similarity of two terms' center vectors; exactly 1 for a == b."""
    ia = space.id_of(a) if isinstance(a, str) else a
    ib = space.id_of(b) if isinstance(b, str) else b
    if ia == ib:
        return 1.0
    ua, ub = space.center_vectors[ia], space.center_vectors[ib]
    denom = max(float(np.linalg.norm(ua) * np.linalg.norm(ub)), _NORM_FLOOR)
    return float(np.clip(np.dot(ua, ub) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class PairBatch:
    """Positive pairs with pre-drawn negatives; -1 marks a skipped draw."""

    centers: np.ndarray    # (B,) term ids
    positives: np.ndarray  # (B,) ids within the context family
    negatives: np.ndarray  # (B, K) ids within the context family, or -1

    def __post_init__(self) -> None:
        if self.negatives.ndim != 2 or self.negatives.shape[0] != len(self.centers):
            raise ValidationError("negatives must be a (batch, k) array")

    def __len__(self) -> int:
        return len(self.centers)

    def sample_terms(self) -> int:
        return len(self.centers) + int(np.count_nonzero(self.negatives >= 0))


@dataclass(frozen=True)
class TrainingBatch:
    """One sample of all three context kinds, for diagnostics and tests."""

    skipgram: PairBatch | None
    document: PairBatch | None
    category: PairBatch | None


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_sigmoid(x))


def _flatten_batch(batch: PairBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expand positives and unmasked negatives into flat (center, ctx, sign)."""
    b, k = batch.negatives.shape
    keep = batch.negatives.ravel() >= 0
    centers = np.concatenate([batch.centers, np.repeat(batch.centers, k)[keep]])
    contexts = np.concatenate([batch.positives, batch.negatives.ravel()[keep]])
    signs = np.concatenate([np.ones(b), -np.ones(int(keep.sum()))])
    return centers.astype(np.int64), contexts.astype(np.int64), signs


def _pair_objective_and_grads(
    u_rows: np.ndarray, v_rows: np.ndarray, kappa_rows: np.ndarray, signs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Log-likelihood and gradients for pairs with true-cosine logits.

    The logit of a pair is ``sign * kappa * cos(u, v)`` with the genuine
    normalized cosine, so the gradients returned here are exact for inputs
    of any norm; on the unit sphere the vector gradients are automatically
    tangential, which makes projected SGD a clean retraction step.
    """
    norm_u = np.maximum(np.sqrt(np.einsum("ij,ij->i", u_rows, u_rows)), _NORM_FLOOR)
    norm_v = np.maximum(np.sqrt(np.einsum("ij,ij->i", v_rows, v_rows)), _NORM_FLOOR)
    u_hat = u_rows / norm_u[:, None]
    v_hat = v_rows / norm_v[:, None]
    cos = np.einsum("ij,ij->i", u_hat, v_hat)
    logits = signs * kappa_rows * cos
    ll = _log_sigmoid(logits)
    # d ll / d logit = sigmoid(-logit)
    slack = _sigmoid(-logits)
    d_cos = slack * signs * kappa_rows
    d_kappa = slack * signs * cos
    grad_u = (d_cos / norm_u)[:, None] * v_hat - (d_cos * cos / norm_u)[:, None] * u_hat
    grad_v = (d_cos / norm_v)[:, None] * u_hat - (d_cos * cos / norm_v)[:, None] * v_hat
    return ll, grad_u, grad_v, d_kappa


def component_objective(
    center_vectors: np.ndarray,
    context_vectors: np.ndarray,
    kappa: np.ndarray,
    batch: PairBatch,
) -> float:
    """Negative-sampled log-likelihood of one context component."""
    centers, contexts, signs = _flatten_batch(batch)
    ll, _, _, _ = _pair_objective_and_grads(
        center_vectors[centers], context_vectors[contexts], kappa[centers], signs
    )
    return float(ll.sum())


def component_objective_and_grads(
    center_vectors: np.ndarray,
    context_vectors: np.ndarray,
    kappa: np.ndarray,
    batch: PairBatch,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Objective plus dense gradients w.r.t. every parameter array entry."""
    centers, contexts, signs = _flatten_batch(batch)
    ll, grad_u_rows, grad_v_rows, grad_k_rows = _pair_objective_and_grads(
        center_vectors[centers], context_vectors[contexts], kappa[centers], signs
    )
    grad_u = np.zeros_like(center_vectors)
    grad_v = np.zeros_like(context_vectors)
    grad_kappa = np.zeros_like(kappa)
    np.add.at(grad_u, centers, grad_u_rows)
    np.add.at(grad_v, contexts, grad_v_rows)
    np.add.at(grad_kappa, centers, grad_k_rows)
    return float(ll.sum()), grad_u, grad_v, grad_kappa


def objective_terms(
    space: EmbeddingSpace, batch: TrainingBatch
) -> tuple[float, float, float]:
    """The three objective components evaluated separately on one batch."""
    out = []
    for pairs, family in (
        (batch.skipgram, space.context_vectors),
        (batch.document, space.doc_vectors),
        (batch.category, space.category_vectors),
    ):
        if pairs is None or len(pairs) == 0:
            out.append(0.0)
        else:
            out.append(component_objective(space.center_vectors, family, space.kappa, pairs))
    return out[0], out[1], out[2]


def _resolve_topic_ids(
    vocab: Vocabulary, seeds: SeedSet, topic_terms: Sequence[Sequence[str]] | None
) -> list[list[int]]:
    if topic_terms is None:
        topic_terms = [[s] for s in seeds]
    if len(topic_terms) != len(seeds):
        raise ValidationError(
            f"expected {len(seeds)} topic term sets, got {len(topic_terms)}"
        )
    resolved = []
    for i, terms in enumerate(topic_terms):
        if not terms:
            raise ValidationError(f"topic term set {i} is empty")
        ids = []
        for term in terms:
            if term not in vocab:
                raise ValidationError(
                    f"topic term not in vocabulary: {term!r} (category {seeds.seeds[i]!r})"
                )
            ids.append(vocab.id_of(term))
        resolved.append(ids)
    return resolved


def _random_unit_rows(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    rows = rng.standard_normal((n, p))
    rows /= np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), _NORM_FLOOR)
    return rows


def _scatter_add(target: np.ndarray, indices: np.ndarray, rows: np.ndarray, scale: float) -> np.ndarray:
    """Accumulate ``scale * rows`` into ``target`` at ``indices``; returns the touched rows.

    Duplicate indices are summed (sort plus segmented reduction, which is far
    faster than buffered fancy-index addition and equally deterministic).
    """
    order = np.argsort(indices, kind="stable")
    sorted_idx = indices[order]
    boundaries = np.flatnonzero(
        np.concatenate(([True], sorted_idx[1:] != sorted_idx[:-1]))
    )
    sums = np.add.reduceat(rows[order], boundaries, axis=0)
    touched = sorted_idx[boundaries]
    target[touched] += scale * sums
    return touched


class _NoiseSampler:
    """Deterministic draws from the unigram^0.75 distribution."""

    def __init__(self, frequencies: np.ndarray):
        weights = frequencies.astype(np.float64) ** _NOISE_POWER
        self._cumulative = np.cumsum(weights / weights.sum())

    def draw(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        picks = np.searchsorted(self._cumulative, rng.random(shape))
        return np.minimum(picks, len(self._cumulative) - 1).astype(np.int64)


class _Trainer:
    def __init__(
        self,
        corpus: Corpus,
        vocab: Vocabulary,
        topic_ids: list[list[int]],
        config: TrainConfig,
    ):
        self.config = config
        self.vocab = vocab
        self.n_terms = len(vocab)
        self.n_docs = len(corpus)
        self.n_cats = len(topic_ids)
        self.rng = np.random.default_rng(config.rng_seed)
        p = config.dimension
        self.center = _random_unit_rows(self.rng, self.n_terms, p)
        self.context = _random_unit_rows(self.rng, self.n_terms, p)
        self.doc_vecs = _random_unit_rows(self.rng, self.n_docs, p)
        self.cat_vecs = _random_unit_rows(self.rng, self.n_cats, p)
        self.kappa = np.ones(self.n_terms, dtype=np.float64)
        self.noise = _NoiseSampler(vocab.frequencies)

        pairs = np.fromiter(
            (x for pair in skipgram_pairs(corpus, vocab, config.window) for x in pair),
            dtype=np.int64,
        ).reshape(-1, 2)
        self.sg_centers = pairs[:, 0] if len(pairs) else np.empty(0, dtype=np.int64)
        self.sg_contexts = pairs[:, 1] if len(pairs) else np.empty(0, dtype=np.int64)

        doc_pairs = [
            (vocab.term_to_id[token], doc_id)
            for doc_id, _, sentence in corpus.sentences()
            for token in sentence
            if token in vocab.term_to_id
        ]
        doc_arr = np.array(doc_pairs, dtype=np.int64).reshape(-1, 2)
        self.doc_centers = doc_arr[:, 0]
        self.doc_targets = doc_arr[:, 1]

        cat_pairs = [(w, i) for i, terms in enumerate(topic_ids) for w in terms]
        cat_arr = np.array(cat_pairs, dtype=np.int64).reshape(-1, 2)
        self.cat_centers = cat_arr[:, 0]
        self.cat_targets = cat_arr[:, 1]

    def _negatives_for(self, kind: str, positives: np.ndarray) -> np.ndarray:
        k = self.config.negatives
        b = len(positives)
        if k == 0:
            return np.empty((b, 0), dtype=np.int64)
        if kind == "skipgram":
            negs = self.noise.draw(self.rng, (b, k))
            negs[negs == positives[:, None]] = -1
        elif kind == "document":
            if self.n_docs <= 1:
                return np.full((b, k), -1, dtype=np.int64)
            negs = self.rng.integers(0, self.n_docs, (b, k))
            negs[negs == positives[:, None]] = -1
        else:
            if self.n_cats <= 1:
                return np.full((b, k), -1, dtype=np.int64)
            negs = self.rng.integers(0, self.n_cats - 1, (b, k))
            negs = negs + (negs >= positives[:, None])
        return negs.astype(np.int64)

    def _check_finite(self, ll: np.ndarray, centers: np.ndarray, contexts: np.ndarray) -> None:
        if np.all(np.isfinite(ll)):
            return
        bad = int(np.flatnonzero(~np.isfinite(ll))[0])
        term = self.vocab.terms[int(centers[bad])]
        raise RuntimeError(
            f"non-finite objective for sample (center={term!r}, context_id={int(contexts[bad])})"
        )

    def _run_phase(
        self, kind: str, centers: np.ndarray, positives: np.ndarray,
        ctx_matrix: np.ndarray, lr: float,
    ) -> tuple[float, int]:
        if len(centers) == 0:
            return 0.0, 0
        order = self.rng.permutation(len(centers))
        centers = centers[order]
        positives = positives[order]
        total_ll = 0.0
        total_terms = 0
        for start in range(0, len(centers), self.config.batch_size):
            c = centers[start : start + self.config.batch_size]
            pos = positives[start : start + self.config.batch_size]
            negs = self._negatives_for(kind, pos)
            batch = PairBatch(c, pos, negs)
            flat_c, flat_z, signs = _flatten_batch(batch)
            ll, grad_u, grad_v, grad_k = _pair_objective_and_grads(
                self.center[flat_c], ctx_matrix[flat_z], self.kappa[flat_c], signs
            )
            self._check_finite(ll, flat_c, flat_z)
            total_ll += float(ll.sum())
            total_terms += len(flat_c)
            if lr != 0.0:
                touched_c = _scatter_add(self.center, flat_c, grad_u, lr)
                touched_z = _scatter_add(ctx_matrix, flat_z, grad_v, lr)
                self.kappa += lr * np.bincount(
                    flat_c, weights=grad_k, minlength=self.n_terms
                )
                self._project(self.center, touched_c)
                self._project(ctx_matrix, touched_z)
                np.clip(self.kappa, 0.0, self.config.kappa_max, out=self.kappa)
        return total_ll, total_terms

    @staticmethod
    def _project(matrix: np.ndarray, rows: np.ndarray) -> None:
        norms = np.maximum(np.linalg.norm(matrix[rows], axis=1, keepdims=True), _NORM_FLOOR)
        matrix[rows] /= norms

    def _epoch_lr(self, epoch: int) -> float:
        cfg = self.config
        if cfg.epochs == 1:
            return cfg.learning_rate
        t = epoch / (cfg.epochs - 1)
        return cfg.learning_rate + t * (cfg.final_learning_rate - cfg.learning_rate)

    def _constraint_stats(self) -> tuple[float, float, float]:
        worst = 0.0
        for family in (self.center, self.context, self.doc_vecs, self.cat_vecs):
            if family.size:
                norms = np.linalg.norm(family, axis=1)
                worst = max(worst, float(np.abs(norms - 1.0).max()))
        return worst, float(self.kappa.min()), float(self.kappa.max())

    def train(self) -> list[EpochStats]:
        history = []
        for epoch in range(self.config.epochs):
            lr = self._epoch_lr(epoch)
            sg_ll, sg_n = self._run_phase(
                "skipgram", self.sg_centers, self.sg_contexts, self.context, lr
            )
            doc_ll, doc_n = self._run_phase(
                "document", self.doc_centers, self.doc_targets, self.doc_vecs, lr
            )
            cat_ll, cat_n = self._run_phase(
                "category", self.cat_centers, self.cat_targets, self.cat_vecs, lr
            )
            norm_error, kappa_lo, kappa_hi = self._constraint_stats()
            history.append(
                EpochStats(
                    skipgram_ll=sg_ll,
                    document_ll=doc_ll,
                    category_ll=cat_ll,
                    positives=len(self.sg_centers) + len(self.doc_centers) + len(self.cat_centers),
                    sample_terms=sg_n + doc_n + cat_n,
                    max_norm_error=norm_error,
                    kappa_min=kappa_lo,
                    kappa_max=kappa_hi,
                )
            )
        return history


def train_embeddings(
    corpus: Corpus,
    vocab: Vocabulary,
    seeds: SeedSet,
    topic_terms: Sequence[Sequence[str]] | None,
    config: TrainConfig,
) -> EmbeddingSpace:
    """Train the joint embedding; category contexts use exactly ``topic_terms``.

    ``topic_terms`` defaults to one singleton set per seed.
    """
    config.validate()
    topic_ids = _resolve_topic_ids(vocab, seeds, topic_terms)
    trainer = _Trainer(corpus, vocab, topic_ids, config)
    history = trainer.train()
    return EmbeddingSpace(
        terms=vocab.terms,
        term_to_id=dict(vocab.term_to_id),
        center_vectors=trainer.center,
        context_vectors=trainer.context,
        doc_vectors=trainer.doc_vecs,
        category_vectors=trainer.cat_vecs,
        kappa=trainer.kappa,
        history=tuple(history),
    )


def sample_training_batch(
    corpus: Corpus,
    vocab: Vocabulary,
    seeds: SeedSet,
    topic_terms: Sequence[Sequence[str]] | None,
    config: TrainConfig,
    rng_seed: int = 0,
) -> TrainingBatch:
    """Draw one full pass of positives with fresh negatives (diagnostics)."""
    config.validate()
    topic_ids = _resolve_topic_ids(vocab, seeds, topic_terms)
    trainer = _Trainer(corpus, vocab, topic_ids, config)
    trainer.rng = np.random.default_rng(rng_seed)

    def build(kind: str, centers: np.ndarray, positives: np.ndarray) -> PairBatch | None:
        if len(centers) == 0:
            return None
        return PairBatch(centers, positives, trainer._negatives_for(kind, positives))

    return TrainingBatch(
        skipgram=build("skipgram", trainer.sg_centers, trainer.sg_contexts),
        document=build("document", trainer.doc_centers, trainer.doc_targets),
        category=build("category", trainer.cat_centers, trainer.cat_targets),
    )


def save_embeddings(space: EmbeddingSpace, path: str | Path) -> None:
    """Write the binary checkpoint (see README for the exact layout)."""
    path = Path(path)
    p = space.dimension
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIIII",
                _FORMAT_VERSION,
                p,
                len(space.terms),
                space.doc_vectors.shape[0],
                space.category_vectors.shape[0],
            )
        )
        for term in space.terms:
            raw = term.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for block in (
            space.center_vectors,
            space.context_vectors,
            space.doc_vectors,
            space.category_vectors,
            space.kappa,
        ):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingSpace:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _MAGIC:
        raise ValidationError(f"{path}: not an embedding checkpoint (bad magic)")
    version, p, n_terms, n_docs, n_cats = struct.unpack_from("<IIIII", data, 4)
    if version != _FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    offset = 4 + 20
    terms = []
    for _ in range(n_terms):
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        terms.append(data[offset : offset + length].decode("utf-8"))
        offset += length

    def read_block(rows: int, cols: int) -> np.ndarray:
        nonlocal offset
        count = rows * cols
        block = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return block.reshape(rows, cols).copy() if cols > 1 else block.copy()

    center = read_block(n_terms, p)
    context = read_block(n_terms, p)
    docs = read_block(n_docs, p)
    cats = read_block(n_cats, p)
    kappa = read_block(n_terms, 1)
    if offset != len(data):
        raise ValidationError(f"{path}: trailing bytes in checkpoint")
    return EmbeddingSpace(
        terms=tuple(terms),
        term_to_id={t: i for i, t in enumerate(terms)},
        center_vectors=center,
        context_vectors=context,
        doc_vectors=docs,
        category_vectors=cats,
        kappa=kappa,
    )


def export_embeddings_text(space: EmbeddingSpace, path: str | Path) -> None:
    """Plain-text export: one line per term, ``term kappa c1 ... cp``."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "dimension": space.dimension,
            "terms": len(space.terms),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, term in enumerate(space.terms):
            components = " ".join(repr(float(x)) for x in space.center_vectors[i])
            fh.write(f"{term} {float(space.kappa[i])!r} {components}\n")
