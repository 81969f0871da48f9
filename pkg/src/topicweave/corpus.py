"""Corpus loading, tokenization, vocabulary statistics, and train/test splitting.

File format: UTF-8 text, one document per line. Tokens are separated by
single spaces and lowercased on load; sentences are separated by a delimiter
token (the literal token "." by default). Multi-word terms arrive as single
underscore-joined tokens. An empty line is a document with no sentences.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ValidationError

DEFAULT_SENTENCE_DELIMITER = "."


@dataclass(frozen=True)
class Corpus:
    """Documents as ordered sentences of ordered tokens.

    ``documents[doc_id][sent_id]`` is the token list of one sentence; both
    ids are dense positional indices.
    """

    documents: tuple[tuple[tuple[str, ...], ...], ...]

    def __len__(self) -> int:
        return len(self.documents)

    def sentences(self) -> Iterator[tuple[int, int, tuple[str, ...]]]:
        """Yield (doc_id, sent_id, tokens) over the whole corpus."""
        for doc_id, doc in enumerate(self.documents):
            for sent_id, tokens in enumerate(doc):
                yield doc_id, sent_id, tokens

    def tokens(self) -> Iterator[str]:
        for _, _, sentence in self.sentences():
            yield from sentence

    def sentence(self, doc_id: int, sent_id: int) -> tuple[str, ...]:
        return self.documents[doc_id][sent_id]

    def total_tokens(self) -> int:
        return sum(len(s) for _, _, s in self.sentences())


def _parse_line(line: str, line_number: int, delimiter: str) -> tuple[tuple[str, ...], ...]:
    if line == "":
        return ()
    sentences: list[tuple[str, ...]] = []
    current: list[str] = []
    for token in line.split(" "):
        if token == "":
            raise ValidationError(
                f"malformed line {line_number}: empty token "
                "(double, leading, or trailing space)"
            )
        token = token.lower()
        if token == delimiter:
            if current:
                sentences.append(tuple(current))
                current = []
        else:
            current.append(token)
    if current:
        sentences.append(tuple(current))
    return tuple(sentences)


def load_corpus(path: str | Path, delimiter: str = DEFAULT_SENTENCE_DELIMITER) -> Corpus:
    """Parse a corpus file into a :class:`Corpus`.

    Raises :class:`ValidationError` for unreadable bytes, malformed lines
    (reported with their 1-based line number), or a corpus without a single
    token.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path}: not valid UTF-8 ({exc})") from exc
    return parse_corpus(text, delimiter=delimiter)


def parse_corpus(text: str, delimiter: str = DEFAULT_SENTENCE_DELIMITER) -> Corpus:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    documents = tuple(
        _parse_line(line, number, delimiter) for number, line in enumerate(lines, start=1)
    )
    corpus = Corpus(documents)
    if corpus.total_tokens() == 0:
        raise ValidationError("empty corpus")
    return corpus


def serialize_corpus(corpus: Corpus, delimiter: str = DEFAULT_SENTENCE_DELIMITER) -> str:
    """Render the canonical text form: every sentence ends with the delimiter.

    ``parse_corpus(serialize_corpus(c))`` reproduces ``c`` exactly.
    """
    lines = []
    for doc in corpus.documents:
        lines.append(" ".join(" ".join(sentence) + f" {delimiter}" for sentence in doc))
    return "\n".join(lines) + "\n"


def corpus_checksum(corpus: Corpus, delimiter: str = DEFAULT_SENTENCE_DELIMITER) -> str:
    """SHA-256 of the canonical serialization; binds mention files to a corpus."""
    return hashlib.sha256(serialize_corpus(corpus, delimiter).encode("utf-8")).hexdigest()


def split_corpus(
    corpus: Corpus, train_fraction: float, rng_seed: int
) -> tuple[Corpus, Corpus]:
    """Partition documents into train and test corpora.

    The split is a seeded uniform permutation of doc_ids; the train side
    gets ``floor(train_fraction * len(corpus))`` documents. Document ids are
    re-densified within each part, preserving original document order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(corpus)
    order = np.random.default_rng(rng_seed).permutation(n)
    n_train = int(np.floor(train_fraction * n))
    train_ids = sorted(order[:n_train].tolist())
    test_ids = sorted(order[n_train:].tolist())
    train = Corpus(tuple(corpus.documents[i] for i in train_ids))
    test = Corpus(tuple(corpus.documents[i] for i in test_ids))
    return train, test


@dataclass(frozen=True)
class Vocabulary:
    """Term ids with exact corpus and document frequencies.

    Ids are assigned by decreasing corpus frequency, ties broken by term
    string, so identical corpora always produce identical vocabularies.
    """

    terms: tuple[str, ...]
    term_to_id: dict[str, int] = field(repr=False)
    frequencies: np.ndarray = field(repr=False)       # (n_terms,) corpus counts
    doc_frequencies: np.ndarray = field(repr=False)   # (n_terms,) document counts

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_id

    def id_of(self, term: str) -> int:
        try:
            return self.term_to_id[term]
        except KeyError:
            raise ValidationError(f"term not in vocabulary: {term!r}") from None

    def frequency(self, term: str) -> int:
        return int(self.frequencies[self.id_of(term)])

    def doc_frequency(self, term: str) -> int:
        return int(self.doc_frequencies[self.id_of(term)])


def build_vocabulary(corpus: Corpus, min_count: int = 3) -> Vocabulary:
    """Count all tokens and keep those occurring at least ``min_count`` times."""
    if len(corpus) == 0:
        raise ValidationError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter(corpus.tokens())
    doc_counts: Counter[str] = Counter()
    for doc in corpus.documents:
        seen = {token for sentence in doc for token in sentence}
        doc_counts.update(seen)
    kept = sorted(
        ((t, c) for t, c in counts.items() if c >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    terms = tuple(t for t, _ in kept)
    return Vocabulary(
        terms=terms,
        term_to_id={t: i for i, t in enumerate(terms)},
        frequencies=np.array([c for _, c in kept], dtype=np.int64),
        doc_frequencies=np.array([doc_counts[t] for t, _ in kept], dtype=np.int64),
    )


def skipgram_pairs(
    corpus: Corpus, vocab: Vocabulary, window: int
) -> Iterator[tuple[int, int]]:
    """Yield (center_id, context_id) for every in-vocabulary pair.

    Window positions are taken over each document's full token sequence, so
    contexts cross sentence boundaries but never document boundaries.
    Out-of-vocabulary tokens occupy positions but never form pairs.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    for doc in corpus.documents:
        tokens = [token for sentence in doc for token in sentence]
        ids = [vocab.term_to_id.get(token, -1) for token in tokens]
        for i, center in enumerate(ids):
            if center < 0:
                continue
            lo = max(0, i - window)
            hi = min(len(ids), i + window + 1)
            for j in range(lo, hi):
                if j == i or ids[j] < 0:
                    continue
                yield center, ids[j]


@dataclass(frozen=True)
class SeedSet:
    """Ordered seed terms; each seed names one category."""

    seeds: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.seeds) < 2:
            raise ValidationError("at least two seeds are required")
        if len(set(self.seeds)) != len(self.seeds):
            dupes = sorted({s for s in self.seeds if self.seeds.count(s) > 1})
            raise ValidationError(f"duplicate seeds: {', '.join(dupes)}")
        for seed in self.seeds:
            if not seed or " " in seed:
                raise ValidationError(f"invalid seed token: {seed!r}")

    def __len__(self) -> int:
        return len(self.seeds)

    def __iter__(self) -> Iterator[str]:
        return iter(self.seeds)


def load_seeds(path: str | Path) -> SeedSet:
    """Read one lowercased seed per line, skipping blank lines."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path}: not valid UTF-8 ({exc})") from exc
    seeds = tuple(line.strip().lower() for line in text.splitlines() if line.strip())
    if not seeds:
        raise ValidationError(f"{path}: no seeds found")
    return SeedSet(seeds)
