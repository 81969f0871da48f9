"""Per-mention encoder vectors and their averaged term representations.

The interchange file is produced by the external encoder exporter and read
here. Two containers carry the same content:

* text: a JSON header line ``{"format": "mention-vectors", "version": 1,
  "dimension": q, "encoder": name, "corpus_checksum": hex}`` followed by one
  record per line, ``term doc_id sent_id f1 ... fq`` (space separated,
  decimal floats);
* binary: magic ``TWMV``, little-endian u32 version, u32 header length, the
  same header JSON in UTF-8, u64 record count, then per record a u32 term
  byte length, the term in UTF-8, u32 doc_id, u32 sent_id, and q
  little-endian float64 components.

Loading rejects files whose corpus checksum does not match the corpus being
loaded against, and cross-validates every record: the cited sentence must
exist and contain the term.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .corpus import Corpus, Vocabulary, corpus_checksum
from .errors import ValidationError

logger = logging.getLogger(__name__)

_MAGIC = b"TWMV"
_FORMAT_VERSION = 1
_FORMAT_NAME = "mention-vectors"
_NORM_FLOOR = 1e-12

DEFAULT_MENTION_CAP = 1000


@dataclass(frozen=True)
class MentionHeader:
    dimension: int
    encoder: str
    corpus_checksum: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": _FORMAT_NAME,
                "version": _FORMAT_VERSION,
                "dimension": self.dimension,
                "encoder": self.encoder,
                "corpus_checksum": self.corpus_checksum,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, raw: str, source: str) -> "MentionHeader":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{source}: invalid mention header JSON ({exc})") from exc
        if not isinstance(data, dict) or data.get("format") != _FORMAT_NAME:
            raise ValidationError(f"{source}: not a mention-vector file")
        if data.get("version") != _FORMAT_VERSION:
            raise ValidationError(f"{source}: unsupported mention format version")
        try:
            return cls(
                dimension=int(data["dimension"]),
                encoder=str(data["encoder"]),
                corpus_checksum=str(data["corpus_checksum"]),
            )
        except KeyError as exc:
            raise ValidationError(f"{source}: mention header missing key {exc}") from exc


@dataclass
class MentionStore:
    """Per-term mention vectors, possibly capped by a seeded reservoir."""

    dimension: int
    encoder: str
    corpus_checksum: str
    vectors: dict[int, np.ndarray] = field(repr=False)   # term_id -> (m, q)
    refs: dict[int, list[tuple[int, int]]] = field(repr=False)
    total_seen: dict[int, int] = field(repr=False)

    def mention_count(self, term_id: int) -> int:
        rows = self.vectors.get(term_id)
        return 0 if rows is None else len(rows)

    def terms_with_mentions(self) -> Iterator[int]:
        return iter(sorted(self.vectors))


@dataclass(frozen=True)
class TermRepresentation:
    """Averaged encoder vectors, one row per vocabulary term.

    ``unit_vectors`` rows are the normalized means; terms without mentions
    (or with a zero-norm mean) have all-zero rows so they contribute zero
    similarity wherever they appear.
    """

    vectors: np.ndarray = field(repr=False)        # (n_terms, q) means
    unit_vectors: np.ndarray = field(repr=False)   # (n_terms, q)
    mention_counts: np.ndarray = field(repr=False)  # (n_terms,)

    def has(self, term_id: int) -> bool:
        return bool(self.mention_counts[term_id] > 0)


def _kahan_mean(rows: np.ndarray) -> np.ndarray:
    """Compensated elementwise mean over mention rows, in row order."""
    total = np.zeros(rows.shape[1], dtype=np.float64)
    compensation = np.zeros_like(total)
    for row in rows:
        y = row - compensation
        t = total + y
        compensation = (t - total) - y
        total = t
    return total / len(rows)


def term_representation(store: MentionStore, term_id: int) -> np.ndarray:
    """Exact mean of a term's stored mention vectors."""
    rows = store.vectors.get(term_id)
    if rows is None or len(rows) == 0:
        raise ValidationError(f"no representation: term id {term_id} has zero mentions")
    return _kahan_mean(rows)


def build_representations(store: MentionStore, vocab: Vocabulary) -> TermRepresentation:
    q = store.dimension
    n = len(vocab)
    means = np.zeros((n, q), dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    for term_id, rows in store.vectors.items():
        if len(rows) == 0:
            continue
        means[term_id] = _kahan_mean(rows)
        counts[term_id] = len(rows)
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    units = np.divide(means, norms, out=np.zeros_like(means), where=norms > _NORM_FLOOR)
    return TermRepresentation(vectors=means, unit_vectors=units, mention_counts=counts)


def similarity(reps: TermRepresentation, a: int, b: int) -> float:
    """Cosine similarity of two averaged representations; exactly 1 for a == b."""
    for term_id in (a, b):
        if not reps.has(term_id):
            raise ValidationError(f"no representation: term id {term_id} has zero mentions")
        if float(np.linalg.norm(reps.vectors[term_id])) <= _NORM_FLOOR:
            raise ValidationError(f"zero-norm representation for term id {term_id}")
    if a == b:
        return 1.0
    return float(np.clip(np.dot(reps.unit_vectors[a], reps.unit_vectors[b]), -1.0, 1.0))


def _validate_record(
    term: str,
    doc_id: int,
    sent_id: int,
    corpus: Corpus,
    vocab: Vocabulary,
    where: str,
) -> int:
    if term not in vocab:
        raise ValidationError(f"{where}: mention term not in vocabulary: {term!r}")
    if doc_id < 0 or doc_id >= len(corpus) or sent_id < 0 or sent_id >= len(
        corpus.documents[doc_id]
    ):
        raise ValidationError(
            f"{where}: dangling mention (doc {doc_id}, sentence {sent_id})"
        )
    if term not in corpus.documents[doc_id][sent_id]:
        raise ValidationError(
            f"{where}: term {term!r} absent from cited sentence (doc {doc_id}, sentence {sent_id})"
        )
    return vocab.id_of(term)


def _iter_text_records(
    path: Path, header: MentionHeader
) -> Iterator[tuple[str, int, int, np.ndarray, str]]:
    with path.open("r", encoding="utf-8") as fh:
        next(fh)  # header already parsed
        for number, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            where = f"{path}:{number}"
            parts = line.split(" ")
            if len(parts) < 3:
                raise ValidationError(f"{where}: malformed mention record")
            term = parts[0]
            try:
                doc_id, sent_id = int(parts[1]), int(parts[2])
                vector = np.array([float(x) for x in parts[3:]], dtype=np.float64)
            except ValueError as exc:
                raise ValidationError(f"{where}: malformed mention record ({exc})") from exc
            if len(vector) != header.dimension:
                raise ValidationError(
                    f"{where}: dimension mismatch (expected {header.dimension}, got {len(vector)})"
                )
            yield term, doc_id, sent_id, vector, where


def _iter_binary_records(
    path: Path, data: bytes, offset: int, count: int, header: MentionHeader
) -> Iterator[tuple[str, int, int, np.ndarray, str]]:
    for index in range(count):
        where = f"{path}[record {index}]"
        try:
            (term_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            term = data[offset : offset + term_len].decode("utf-8")
            offset += term_len
            doc_id, sent_id = struct.unpack_from("<II", data, offset)
            offset += 8
            vector = np.frombuffer(
                data, dtype="<f8", count=header.dimension, offset=offset
            ).astype(np.float64)
            offset += header.dimension * 8
        except (struct.error, UnicodeDecodeError, ValueError) as exc:
            raise ValidationError(f"{where}: truncated or corrupt record ({exc})") from exc
        yield term, doc_id, sent_id, vector, where
    if offset != len(data):
        raise ValidationError(f"{path}: trailing bytes after last record")


def load_mentions(
    path: str | Path,
    corpus: Corpus,
    vocab: Vocabulary,
    cap_per_term: int | None = DEFAULT_MENTION_CAP,
    cap_rng_seed: int = 7,
) -> MentionStore:
    """Load an interchange file, cross-validating every record.

    When ``cap_per_term`` is set, each term keeps a uniform reservoir sample
    of at most that many mentions, drawn with the seeded generator; ``None``
    keeps every mention in file order.
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == _MAGIC:
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != _FORMAT_VERSION:
            raise ValidationError(f"{path}: unsupported mention format version {version}")
        (header_len,) = struct.unpack_from("<I", raw, 8)
        header = MentionHeader.from_json(
            raw[12 : 12 + header_len].decode("utf-8"), str(path)
        )
        (count,) = struct.unpack_from("<Q", raw, 12 + header_len)
        records = _iter_binary_records(path, raw, 12 + header_len + 8, count, header)
    else:
        try:
            first_line = raw.split(b"\n", 1)[0].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValidationError(f"{path}: not a mention-vector file ({exc})") from exc
        header = MentionHeader.from_json(first_line, str(path))
        records = _iter_text_records(path, header)

    expected = corpus_checksum(corpus)
    if header.corpus_checksum != expected:
        raise ValidationError(
            f"{path}: corpus checksum mismatch "
            f"(file {header.corpus_checksum[:12]}..., corpus {expected[:12]}...)"
        )
    if cap_per_term is not None and cap_per_term < 1:
        raise ValidationError("cap_per_term must be >= 1 or None")

    rng = np.random.default_rng(cap_rng_seed)
    vectors: dict[int, list[np.ndarray]] = {}
    refs: dict[int, list[tuple[int, int]]] = {}
    seen: dict[int, int] = {}
    for term, doc_id, sent_id, vector, where in records:
        term_id = _validate_record(term, doc_id, sent_id, corpus, vocab, where)
        seen[term_id] = seen.get(term_id, 0) + 1
        bucket = vectors.setdefault(term_id, [])
        ref_bucket = refs.setdefault(term_id, [])
        if cap_per_term is None or len(bucket) < cap_per_term:
            bucket.append(vector)
            ref_bucket.append((doc_id, sent_id))
        else:
            slot = int(rng.integers(0, seen[term_id]))
            if slot < cap_per_term:
                bucket[slot] = vector
                ref_bucket[slot] = (doc_id, sent_id)
    stacked = {tid: np.vstack(rows) for tid, rows in vectors.items()}
    capped = sum(1 for tid, n in seen.items() if cap_per_term is not None and n > cap_per_term)
    if capped:
        logger.info("mention cap applied to %d terms", capped)
    return MentionStore(
        dimension=header.dimension,
        encoder=header.encoder,
        corpus_checksum=header.corpus_checksum,
        vectors=stacked,
        refs=refs,
        total_seen=seen,
    )


def write_mentions(
    path: str | Path,
    records: Iterable[tuple[str, int, int, np.ndarray]],
    dimension: int,
    encoder: str,
    corpus_checksum_value: str,
    container: str = "text",
) -> int:
    """Write an interchange file; used by the exporter and by test fixtures.

    Returns the number of records written.
    """
    path = Path(path)
    header = MentionHeader(dimension, encoder, corpus_checksum_value)
    if container == "text":
        count = 0
        with path.open("w", encoding="utf-8") as fh:
            fh.write(header.to_json() + "\n")
            for term, doc_id, sent_id, vector in records:
                if len(vector) != dimension:
                    raise ValidationError(
                        f"record for {term!r}: dimension mismatch "
                        f"(expected {dimension}, got {len(vector)})"
                    )
                floats = " ".join(repr(float(x)) for x in vector)
                fh.write(f"{term} {doc_id} {sent_id} {floats}\n")
                count += 1
        return count
    if container == "binary":
        materialized = list(records)
        with path.open("wb") as fh:
            fh.write(_MAGIC)
            header_bytes = header.to_json().encode("utf-8")
            fh.write(struct.pack("<II", _FORMAT_VERSION, len(header_bytes)))
            fh.write(header_bytes)
            fh.write(struct.pack("<Q", len(materialized)))
            for term, doc_id, sent_id, vector in materialized:
                if len(vector) != dimension:
                    raise ValidationError(
                        f"record for {term!r}: dimension mismatch "
                        f"(expected {dimension}, got {len(vector)})"
                    )
                raw = term.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<II", doc_id, sent_id))
                fh.write(np.ascontiguousarray(vector, dtype="<f8").tobytes())
        return len(materialized)
    raise ValidationError(f"unknown mention container: {container!r}")
