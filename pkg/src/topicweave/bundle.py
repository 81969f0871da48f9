"""Preprocessed corpus bundle: split corpora, vocabulary, seeds, manifest.

A bundle directory holds ``train.txt`` and ``test.txt`` (canonical corpus
serialization), ``seeds.txt``, a ``vocab.tsv`` export (term, corpus
frequency, document frequency), and ``manifest.json`` with SHA-256 checksums
of every file plus the train-corpus checksum that mention-vector files must
carry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig
from .corpus import (
    Corpus,
    SeedSet,
    Vocabulary,
    build_vocabulary,
    corpus_checksum,
    load_corpus,
    load_seeds,
    serialize_corpus,
    split_corpus,
)
from .errors import ValidationError

MANIFEST_NAME = "manifest.json"
_FORMAT_NAME = "topicweave-bundle"
_FORMAT_VERSION = 1


@dataclass
class Bundle:
    train: Corpus
    test: Corpus
    vocab: Vocabulary
    seeds: SeedSet
    manifest: dict
    path: Path

    @property
    def train_checksum(self) -> str:
        return self.manifest["corpus_checksum"]


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _vocab_tsv(vocab: Vocabulary) -> str:
    lines = ["term\tfrequency\tdoc_frequency"]
    for i, term in enumerate(vocab.terms):
        lines.append(f"{term}\t{vocab.frequencies[i]}\t{vocab.doc_frequencies[i]}")
    return "\n".join(lines) + "\n"


def write_bundle(
    out_dir: str | Path,
    corpus_path: str | Path,
    seeds_path: str | Path,
    config: RunConfig,
) -> Bundle:
    """Load, split, build the vocabulary, validate seeds, and write the bundle."""
    out_dir = Path(out_dir)
    delimiter = config.corpus.sentence_delimiter
    full = load_corpus(corpus_path, delimiter=delimiter)
    seeds = load_seeds(seeds_path)
    train, test = split_corpus(full, config.split.train_fraction, config.split.rng_seed)
    vocab = build_vocabulary(train, config.corpus.min_count)
    missing = [s for s in seeds if s not in vocab]
    if missing:
        raise ValidationError(
            f"seed not in training vocabulary: {', '.join(missing)} "
            f"(min_count={config.corpus.min_count})"
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "train.txt": serialize_corpus(train, delimiter),
        "test.txt": serialize_corpus(test, delimiter),
        "seeds.txt": "\n".join(seeds.seeds) + "\n",
        "vocab.tsv": _vocab_tsv(vocab),
    }
    checksums = {}
    for name, content in files.items():
        path = out_dir / name
        path.write_text(content, encoding="utf-8")
        checksums[name] = _sha256_file(path)
    manifest = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "config_hash": config.config_hash(),
        "sentence_delimiter": delimiter,
        "min_count": config.corpus.min_count,
        "train_fraction": config.split.train_fraction,
        "split_rng_seed": config.split.rng_seed,
        "corpus_checksum": corpus_checksum(train, delimiter),
        "counts": {
            "documents": len(full),
            "train_documents": len(train),
            "test_documents": len(test),
            "vocabulary_terms": len(vocab),
            "seeds": len(seeds),
        },
        "files": checksums,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return Bundle(train=train, test=test, vocab=vocab, seeds=seeds, manifest=manifest, path=out_dir)


def load_bundle(path: str | Path) -> Bundle:
    """Read a bundle back, verifying every file checksum."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValidationError(f"not a bundle directory (no {MANIFEST_NAME}): {path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != _FORMAT_NAME:
        raise ValidationError(f"{manifest_path}: unknown bundle format")
    if manifest.get("version") != _FORMAT_VERSION:
        raise ValidationError(f"{manifest_path}: unsupported bundle version")
    for name, expected in manifest["files"].items():
        actual = _sha256_file(path / name)
        if actual != expected:
            raise ValidationError(
                f"bundle file checksum mismatch: {name} "
                f"(expected {expected[:12]}..., got {actual[:12]}...)"
            )
    delimiter = manifest["sentence_delimiter"]
    train = load_corpus(path / "train.txt", delimiter=delimiter)
    test = load_corpus(path / "test.txt", delimiter=delimiter)
    seeds = load_seeds(path / "seeds.txt")
    vocab = build_vocabulary(train, manifest["min_count"])
    recomputed = corpus_checksum(train, delimiter)
    if recomputed != manifest["corpus_checksum"]:
        raise ValidationError(
            f"bundle train corpus checksum mismatch in {path}: "
            f"manifest {manifest['corpus_checksum'][:12]}..., actual {recomputed[:12]}..."
        )
    return Bundle(train=train, test=test, vocab=vocab, seeds=seeds, manifest=manifest, path=path)
