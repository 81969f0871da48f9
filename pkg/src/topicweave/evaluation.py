"""Topic quality metrics: coherence on held-out documents and term accuracy.

Coherence is normalized pointwise mutual information averaged over the
unordered term pairs of each topic, with probabilities taken as document
frequencies on the evaluation corpus. Term accuracy compares ranked topic
terms against gold labels, plain (precision) and position-discounted (NDCG
with a base-2 logarithm).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus
from .errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GoldLabels:
    """Per-seed sets of terms judged to belong to the category."""

    labels: dict[str, frozenset[str]]

    def terms_for(self, seed: str) -> frozenset[str]:
        try:
            return self.labels[seed]
        except KeyError:
            raise ValidationError(f"category missing from gold labels: {seed!r}") from None


def load_gold(path: str | Path) -> GoldLabels:
    """Parse a gold label file.

    Sections start with a header line ``<seed>:``; every following non-blank
    line is one judged-relevant term. Lines starting with ``#`` are comments.
    An empty section is an error.
    """
    path = Path(path)
    labels: dict[str, set[str]] = {}
    current: str | None = None
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.endswith(":"):
            if current is not None and not labels[current]:
                raise ValidationError(f"{path}: empty gold section for seed {current!r}")
            current = line[:-1].strip().lower()
            if not current:
                raise ValidationError(f"{path}:{number}: empty section header")
            if current in labels:
                raise ValidationError(f"{path}:{number}: duplicate section {current!r}")
            labels[current] = set()
        else:
            if current is None:
                raise ValidationError(f"{path}:{number}: term before any section header")
            labels[current].add(line.lower())
    if current is not None and not labels[current]:
        raise ValidationError(f"{path}: empty gold section for seed {current!r}")
    if not labels:
        raise ValidationError(f"{path}: no gold sections found")
    return GoldLabels({seed: frozenset(terms) for seed, terms in labels.items()})


@dataclass(frozen=True)
class CooccurrenceStats:
    """Document frequencies for selected terms and term pairs."""

    doc_count: int
    term_docs: dict[str, int] = field(repr=False)
    pair_docs: dict[tuple[str, str], int] = field(repr=False)

    @classmethod
    def from_corpus(cls, corpus: Corpus, terms: set[str]) -> "CooccurrenceStats":
        term_docs: dict[str, int] = {}
        pair_docs: dict[tuple[str, str], int] = {}
        for doc in corpus.documents:
            present = sorted(
                {token for sentence in doc for token in sentence if token in terms}
            )
            for term in present:
                term_docs[term] = term_docs.get(term, 0) + 1
            for a_idx in range(len(present)):
                for b_idx in range(a_idx + 1, len(present)):
                    key = (present[a_idx], present[b_idx])
                    pair_docs[key] = pair_docs.get(key, 0) + 1
        return cls(doc_count=len(corpus), term_docs=term_docs, pair_docs=pair_docs)

    def pair_count(self, a: str, b: str) -> int:
        key = (a, b) if a <= b else (b, a)
        return self.pair_docs.get(key, 0)


def pair_npmi(stats: CooccurrenceStats, a: str, b: str) -> float | None:
    """NPMI of one term pair; None when either term never occurs.

    A zero joint count scores the limit value -1. The degenerate case of a
    pair present in every document (which forces both marginals to one)
    scores 0, the pointwise mutual information of certainty.
    """
    n = stats.doc_count
    count_a = stats.term_docs.get(a, 0)
    count_b = stats.term_docs.get(b, 0)
    if count_a == 0 or count_b == 0:
        return None
    joint = stats.pair_count(a, b)
    if joint == 0:
        return -1.0
    if joint == n:
        return 0.0
    p_joint = joint / n
    p_a = count_a / n
    p_b = count_b / n
    return math.log(p_joint / (p_a * p_b)) / (-math.log(p_joint))


@dataclass(frozen=True)
class NpmiReport:
    value: float
    topics_evaluated: int
    pairs_evaluated: int
    pairs_skipped: int
    missing_terms: tuple[str, ...]


def npmi(topics: Sequence[Sequence[str]], corpus: Corpus) -> NpmiReport:
    """Mean over topics of the mean pair NPMI on the evaluation corpus.

    Pairs involving a term absent from the corpus are skipped; each topic
    averages over its evaluated pairs only, and topics with no evaluated
    pair drop out of the outer mean. The report carries the coverage.
    """
    for index, terms in enumerate(topics):
        if len(terms) < 2:
            raise ValidationError(f"topic {index} has fewer than 2 terms")
    universe = {t for terms in topics for t in terms}
    stats = CooccurrenceStats.from_corpus(corpus, universe)
    missing = tuple(sorted(t for t in universe if stats.term_docs.get(t, 0) == 0))
    topic_means = []
    evaluated = skipped = 0
    for terms in topics:
        values = []
        distinct = list(dict.fromkeys(terms))
        for a_idx in range(len(distinct)):
            for b_idx in range(a_idx + 1, len(distinct)):
                value = pair_npmi(stats, distinct[a_idx], distinct[b_idx])
                if value is None:
                    skipped += 1
                else:
                    values.append(value)
                    evaluated += 1
        if values:
            topic_means.append(sum(values) / len(values))
    if not topic_means:
        raise ValidationError("no topic pair could be evaluated on this corpus")
    if skipped:
        logger.warning("skipped %d topic pairs without corpus coverage", skipped)
    return NpmiReport(
        value=sum(topic_means) / len(topic_means),
        topics_evaluated=len(topic_means),
        pairs_evaluated=evaluated,
        pairs_skipped=skipped,
        missing_terms=missing,
    )


def _prefix(terms: Sequence[str], k: int, seed: str) -> Sequence[str]:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not terms:
        raise ValidationError(f"topic for seed {seed!r} has no terms")
    if len(terms) < k:
        logger.warning(
            "topic for seed %r has %d terms, fewer than k=%d; evaluating the prefix",
            seed,
            len(terms),
            k,
        )
    return terms[:k]


def precision_at_k(
    topics: Mapping[str, Sequence[str]], gold: GoldLabels, k: int
) -> float:
    """Mean over categories of the fraction of (up to) top-k terms in gold."""
    scores = []
    for seed, terms in topics.items():
        relevant = gold.terms_for(seed)
        prefix = _prefix(terms, k, seed)
        scores.append(sum(1 for t in prefix if t in relevant) / len(prefix))
    if not scores:
        raise ValidationError("no topics to evaluate")
    return sum(scores) / len(scores)


def ndcg_at_k(topics: Mapping[str, Sequence[str]], gold: GoldLabels, k: int) -> float:
    """Mean over categories of DCG over ideal DCG with log2(position + 1) discounts."""
    scores = []
    for seed, terms in topics.items():
        relevant = gold.terms_for(seed)
        prefix = _prefix(terms, k, seed)
        dcg = sum(
            1.0 / math.log2(j + 1)
            for j, term in enumerate(prefix, start=1)
            if term in relevant
        )
        ideal = sum(1.0 / math.log2(j + 1) for j in range(1, len(prefix) + 1))
        scores.append(dcg / ideal)
    if not scores:
        raise ValidationError("no topics to evaluate")
    return sum(scores) / len(scores)
